// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sketchrl/approx.hpp"
#include "sketchrl/errors.hpp"
#include "sketchrl/harness.hpp"
#include "sketchrl/io.hpp"
#include "sketchrl/mdp.hpp"
#include "sketchrl/return_distribution.hpp"
#include "sketchrl/rng.hpp"
#include "sketchrl/sketch.hpp"
#include "sketchrl/verifier.hpp"

#ifndef SKETCHRL_SOURCE_DIR
#define SKETCHRL_SOURCE_DIR "."
#endif

using namespace sketchrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Criteria whose stated value is arithmetically wrong; see README.
const std::set<int> kDocumentedErrata = {4};

int failures = 0, unexpected = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0.0 && secs > budget_s) {
        out.pass = false;
        out.detail += " (over time budget)";
    }
    std::printf("%-4s %2d  %-38s %7.2fs  %s\n", out.pass ? "PASS" : "FAIL", id, name, secs, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) {
        ++failures;
        if (!kDocumentedErrata.count(id)) ++unexpected;
    }
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

ExperimentConfig load_config(const std::string& name) {
    auto cfg = experiment_config_from_json(read_json_file(std::string(SKETCHRL_SOURCE_DIR) + "/configs/" + name));
    cfg.out_dir.clear();
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome moment_closedness() {
    double worst = 0.0;
    int checked = 0;
    for (const auto& inst : random_policy_instances(20, 101)) {
        const auto& mdp = inst.mdp;
        const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
        const auto spec = SketchSpec::moments(4);
        const auto exact = exact_return_distribution(mdp, inst.policy);
        std::vector<std::vector<double>> v(static_cast<std::size_t>(S), compute_sketch(CategoricalDistribution::dirac(0), spec));
        for (int h = H - 1; h >= 0; --h) {
            std::vector<std::vector<double>> vh(static_cast<std::size_t>(S));
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    std::vector<SketchTransition> next;
                    const auto p = mdp.transition(h, s, a);
                    for (int sp = 0; sp < S; ++sp) next.emplace_back(p[static_cast<std::size_t>(sp)], v[static_cast<std::size_t>(sp)]);
                    const auto backed = sketch_bellman_backup(spec, next, mdp.reward(h, s, a));
                    for (int n = 1; n <= 4; ++n) {
                        const double truth = exact.q(h, s, a).raw_moment(n);
                        worst = std::max(worst, std::abs(backed[static_cast<std::size_t>(n - 1)] - truth));
                    }
                    ++checked;
                    if (a == inst.policy.action(h, s)) vh[static_cast<std::size_t>(s)] = backed;
                }
            v = vh;
        }
    }
    return {worst < 1e-9, fmt("max |err| %.3g over %.0f (h,s,a)", worst, checked)};
}

Outcome mean_variance_unbiased() {
    const auto mdps = unbiasedness_mdps();
    double worst = 0.0;
    int combos = 0;
    std::uint64_t stream = 0;
    for (const auto& mdp : mdps)
        for (int k : {2, 3, 5}) {
            Rng rng = make_stream(2, {++stream});
            const auto res = check_bellman_unbiasedness(SketchSpec::mean_variance(), Combiner::mean_variance, mdp, k,
                                                        100'000, rng);
            worst = std::max(worst, res.max_abs_z);
            ++combos;
        }
    return {mdps.size() == 3 && worst < 3.0, fmt("max |z| %.3f over %.0f (mdp,k), 1e5 trials", worst, combos)};
}

Outcome median_quantile_negatives() {
    const WitnessPair w = median_witness(0.3, 0.7);
    const double m1 = compute_sketch(w.mixture(), SketchSpec::median())[0];
    const double m2 = compute_sketch(w.mixture_prime(), SketchSpec::median())[0];
    const auto med = check_mixture_consistency(SketchSpec::median());
    const auto qua = check_mixture_consistency(SketchSpec::quantile(0.25));
    bool raised = false;
    try {
        const std::vector<SketchTransition> next{{0.5, {0.0}}, {0.5, {1.0}}};
        sketch_bellman_backup(SketchSpec::quantile(0.25), next, 0.0);
    } catch (const NotBellmanClosed&) {
        raised = true;
    }
    const bool ok = w.components_match() && m1 == 0.3 && m2 == 0.7 && std::abs(m2 - m1) > 1e-6 &&
                    med.verdict == Verdict::no && med.witness && qua.verdict == Verdict::no && qua.witness &&
                    qua.witness->components_match() && qua.witness->mixture_gap() > 1e-6 && raised;
    return {ok, fmt("mixture medians %.17g vs %.17g, quantile gap %.3g", m1, m2,
                    qua.witness ? qua.witness->mixture_gap() : 0.0) + (raised ? ", backup raised" : ", no raise")};
}

Outcome variance_formula() {
    // Z ~ ½δ0 + ½δ2, Y ~ ½δk + ½δ(k+2), mixed half and half; stated value (k²+5)/4
    bool ok = true;
    std::string detail;
    for (int k : {0, 1, 2}) {
        const double kd = k;
        const auto z = MomentSketch::from_distribution(CategoricalDistribution({0.0, 2.0}, {0.5, 0.5}), 2, 4.0);
        const auto y = MomentSketch::from_distribution(CategoricalDistribution({kd, kd + 2.0}, {0.5, 0.5}), 2, 4.0);
        const std::vector<std::pair<double, MomentSketch>> parts{{0.5, z}, {0.5, y}};
        const double var = moments_to_central(mixture_moments(parts))[0];
        const double stated = (kd * kd + 5.0) / 4.0;
        ok = ok && std::abs(var - stated) < 1e-12;
        detail += fmt("k=%.0f: %.17g vs stated %.17g; ", kd, var, stated);
    }
    if (!ok) detail += "measured values equal (k^2+4)/4, the stated formula is off by 1/4";
    return {ok, detail};
}

Outcome classification() {
    const auto report = classify_functionals();
    const auto regions = report.regions();
    const auto golden = golden_regions();
    std::ifstream is(std::string(SKETCHRL_SOURCE_DIR) + "/tests/golden/regions.json");
    const auto file = nlohmann::json::parse(is);
    std::string detail;
    for (const auto& [kind, region] : regions.items()) detail += kind + "=" + region.get<std::string>() + " ";
    return {regions == golden && regions == file, detail};
}

Outcome extreme_backups() {
    int checked = 0;
    bool exact = true;
    for (const auto& inst : random_policy_instances(20, 606)) {
        const auto& mdp = inst.mdp;
        const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
        for (const auto& spec : {SketchSpec::max(), SketchSpec::min()}) {
            const bool is_max = spec.kind == SketchKind::max;
            std::vector<std::vector<double>> v(static_cast<std::size_t>(S), std::vector<double>{0.0});
            for (int h = H - 1; h >= 0; --h) {
                std::vector<std::vector<double>> vh(static_cast<std::size_t>(S));
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a) {
                        std::vector<SketchTransition> next;
                        const auto p = mdp.transition(h, s, a);
                        for (int sp = 0; sp < S; ++sp) next.emplace_back(p[static_cast<std::size_t>(sp)], v[static_cast<std::size_t>(sp)]);
                        const double backed = sketch_bellman_backup(spec, next, mdp.reward(h, s, a))[0];
                        if (count_trajectories(mdp, inst.policy, h, s, a) <= 10'000) {
                            const auto brute = enumerate_trajectory_returns_from(mdp, inst.policy, h, s, a, 10'000);
                            exact = exact && backed == (is_max ? brute.max_atom() : brute.min_atom());
                            ++checked;
                        }
                        if (a == inst.policy.action(h, s)) vh[static_cast<std::size_t>(s)] = {backed};
                    }
                v = vh;
            }
        }
    }
    return {exact && checked > 0, fmt("%.0f guarded (h,s,a) checks, bitwise equal", checked)};
}

Outcome eluder_sanity() {
    const double eps = 0.05;
    bool ok = true;
    std::string detail;
    EnumeratedFunctionClass single;
    single.S = 4;
    single.tables = {{0.1, 0.2, 0.3, 0.4}};
    ok = ok && eluder_dimension(single, eps, EluderMode::exact) == 0;
    for (int m = 1; m <= 6; ++m) {
        EnumeratedFunctionClass cls;
        cls.S = m;
        for (int mask = 0; mask < (1 << m); ++mask) {
            std::vector<double> t(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) t[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? 2.0 * eps : 0.0;
            cls.tables.push_back(t);
        }
        const int e = eluder_dimension(cls, eps, EluderMode::exact);
        ok = ok && e == m && eluder_dimension(cls, eps, EluderMode::greedy) <= e;
    }
    for (int d = 1; d <= 4; ++d) {
        // one-hot linear class: f(e_i) = w_i with w on a {-2ε, 0, 2ε} grid
        EnumeratedFunctionClass cls;
        cls.S = d;
        int total = 1;
        for (int i = 0; i < d; ++i) total *= 3;
        for (int code = 0; code < total; ++code) {
            std::vector<double> w(static_cast<std::size_t>(d));
            for (int i = 0, c = code; i < d; ++i, c /= 3) w[static_cast<std::size_t>(i)] = 2.0 * eps * (c % 3 - 1);
            cls.tables.push_back(w);
        }
        const int e = eluder_dimension(cls, eps, EluderMode::exact);
        ok = ok && e == d && eluder_dimension(cls, eps, EluderMode::greedy) <= e;
    }
    Rng rng = make_stream(7, {});
    int greedy_ok = 0, total = 0;
    for (int trial = 0; trial < 50; ++trial) {
        EnumeratedFunctionClass cls;
        cls.S = 2 + static_cast<int>(uniform_index(5, rng));
        cls.N = 1 + static_cast<int>(uniform_index(2, rng));
        const int members = 2 + static_cast<int>(uniform_index(8, rng));
        for (int i = 0; i < members; ++i) {
            std::vector<double> t(cls.num_keys() * static_cast<std::size_t>(cls.N));
            for (auto& x : t) x = uniform01(rng);
            cls.tables.push_back(t);
        }
        for (double e : {0.05, 0.2}) {
            ++total;
            if (eluder_dimension(cls, e, EluderMode::greedy) <= eluder_dimension(cls, e, EluderMode::exact)) ++greedy_ok;
        }
    }
    ok = ok && greedy_ok == total;
    return {ok, fmt("singleton 0, indicator m=1..6, one-hot d=1..4, greedy<=exact on %.0f/%.0f", greedy_ok, total)};
}

struct GoldenRuns {
    ExperimentSummary golden, extended, random;
};

GoldenRuns& golden_runs() {
    static GoldenRuns runs = [] {
        GoldenRuns g;
        ExperimentConfig cfg = load_config("golden_chain.json");
        g.golden = run_experiment(cfg);
        // Same learner continued to 2K: T stays at the golden value so the
        // first K episodes coincide with the golden run.
        ExperimentConfig ext = cfg;
        ext.planning.T = static_cast<double>(cfg.K) * build_mdp(cfg.mdp).horizon();
        ext.K = 2 * cfg.K;
        g.extended = run_experiment(ext);
        g.random = run_experiment(load_config("random_chain.json"));
        return g;
    }();
    return runs;
}

Outcome learning() {
    const auto& g = golden_runs();
    const int K = static_cast<int>(g.golden.runs.front().episodes.size());
    const double reg = g.golden.mean_final_regret();
    const double reg_random = g.random.mean_final_regret();
    const RegretFit fit = fit_regret_exponent(g.golden.mean_cumulative_regret());
    const auto ext = g.extended.mean_cumulative_regret();
    const double ratio = ext.back() / ext[static_cast<std::size_t>(K) - 1];
    const bool same_prefix = std::abs(ext[static_cast<std::size_t>(K) - 1] - reg) < 1e-9;
    const bool a = reg <= reg_random / 3.0, b = fit.b <= 0.7 && fit.r2 >= 0.9, c = ratio <= 1.6;
    return {a && b && c && same_prefix,
            fmt("(a) Reg(K) %.2f vs random/3 %.2f; ", reg, reg_random / 3.0) +
                fmt("(b) b %.3f r2 %.3f; ", fit.b, fit.r2) + fmt("(c) Reg(2K)/Reg(K) %.3f", ratio)};
}

Outcome optimism() {
    const auto& g = golden_runs();
    const double rate = g.golden.optimism_violation_rate();
    int decomposition_failures = 0;
    for (const auto& r : g.golden.runs) decomposition_failures += r.decomposition_failures;
    return {rate <= 0.05, fmt("violation rate %.4f (<= 0.05), decomposition failures %.0f", rate, decomposition_failures)};
}

Outcome regression_oracle() {
    Rng rng = make_stream(10, {});
    std::normal_distribution<double> normal;
    double worst_fit = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 4, N = 3, H = 2, S = 3, A = 2;
        std::vector<double> table(static_cast<std::size_t>(H * S * A * d));
        for (auto& v : table) v = normal(rng);
        const FeatureMap fm = FeatureMap::lookup(H, S, A, d, table);
        RegressionDataset data;
        data.N = N;
        data.H = 10.0;
        Eigen::MatrixXd G = Eigen::MatrixXd::Identity(d, d), B = Eigen::MatrixXd::Zero(d, N);
        for (int i = 0; i < 50; ++i) {
            RegressionRow row{static_cast<int>(uniform_index(H, rng)), static_cast<int>(uniform_index(S, rng)),
                              static_cast<int>(uniform_index(A, rng)), {}};
            for (int n = 0; n < N; ++n) row.target.push_back(2.0 * uniform01(rng) - 1.0);
            const Eigen::VectorXd phi = fm(row.h, row.s, row.a);
            G += phi * phi.transpose();
            for (int n = 0; n < N; ++n) B.col(n) += phi * row.target[static_cast<std::size_t>(n)];
            data.rows.push_back(row);
        }
        const Eigen::MatrixXd ref = G.fullPivLu().solve(B).transpose();
        const auto fit = std::get<LinearFit>(fit_moment_regression(data, LinearFunctionClass{fm, N, 1e6}, 1.0));
        worst_fit = std::max(worst_fit, (fit.W - ref).cwiseAbs().maxCoeff());
    }

    // width against boundary samples of {ΔᵀΛΔ = β}
    const int d = 3;
    std::vector<double> table(static_cast<std::size_t>(2 * 3 * 2 * d));
    for (auto& v : table) v = normal(rng);
    const FeatureMap fm = FeatureMap::lookup(2, 3, 2, d, table);
    const FunctionClass cls = LinearFunctionClass{fm, 1, 1e6};
    RegressionDataset data;
    data.N = 1;
    data.H = 10.0;
    for (int i = 0; i < 40; ++i)
        data.rows.push_back({static_cast<int>(uniform_index(2, rng)), static_cast<int>(uniform_index(3, rng)),
                             static_cast<int>(uniform_index(2, rng)), {uniform01(rng)}});
    const double beta = 3.0;
    const ConfidenceRegion region{fit_moment_regression(data, cls, 1.0), beta};
    const Eigen::MatrixXd L = std::get<LinearFit>(region.center).factor.matrixL();
    const Eigen::MatrixXd Linv_t = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(d, d));
    double worst_over = 0.0, worst_under = 0.0;
    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 3; ++s) {
            const Eigen::VectorXd dir = Linv_t.transpose() * fm(h, s, 0);
            double best = 0.0;
            for (int i = 0; i < 1'000'000; ++i) {
                Eigen::Vector3d u(normal(rng), normal(rng), normal(rng));
                best = std::max(best, u.normalized().dot(dir));
            }
            const double sampled = 2.0 * std::sqrt(beta) * best;
            const double closed = width_first_component(region, cls, h, s, 0).value;
            worst_over = std::max(worst_over, closed / sampled - 1.0);
            worst_under = std::max(worst_under, sampled / closed - 1.0);
        }
    const bool ok = worst_fit < 1e-10 && worst_over <= 1e-2 && worst_under <= 1e-12;
    return {ok, fmt("fit |err| %.3g; width closed/sampled - 1 <= %.4f, sampled above closed by %.3g", worst_fit,
                    worst_over, worst_under)};
}

Outcome determinism() {
    ExperimentConfig cfg = load_config("golden_chain.json");
    cfg.K = 500;
    const fs::path base = fs::temp_directory_path() / "sketchrl_acceptance_det";
    fs::remove_all(base);
    cfg.out_dir = (base / "a").string();
    run_experiment(cfg);
    cfg.out_dir = (base / "b").string();
    run_experiment(cfg);
    int same = 0;
    for (auto seed : cfg.seeds) {
        const std::string name = "run_" + std::to_string(seed) + ".csv";
        const auto a = slurp(base / "a" / name);
        if (!a.empty() && a == slurp(base / "b" / name)) ++same;
    }
    fs::remove_all(base);
    return {same == static_cast<int>(cfg.seeds.size()), fmt("%.0f/%.0f CSVs byte-identical", same, cfg.seeds.size())};
}

}  // namespace

int main() {
    criterion(1, "moment Bellman closedness", 5, moment_closedness);
    criterion(2, "mean-variance combiner unbiasedness", 30, mean_variance_unbiased);
    criterion(3, "median/quantile negatives", 1, median_quantile_negatives);
    criterion(4, "variance mixture formula", 1, variance_formula);
    criterion(5, "classification region table", 60, classification);
    criterion(6, "max/min backup exactness", 10, extreme_backups);
    criterion(7, "eluder dimension sanity", 60, eluder_sanity);
    criterion(8, "learning and sublinear regret", 600, learning);
    criterion(9, "optimism audit", 0, optimism);
    criterion(10, "regression oracle equivalence", 30, regression_oracle);
    criterion(11, "determinism", 0, determinism);

    std::printf("%d of 11 criteria failed", failures);
    if (failures > unexpected) std::printf(" (%d documented erratum: criterion 4, see README)", failures - unexpected);
    std::printf("\n");
    return unexpected == 0 ? 0 : 1;
}
