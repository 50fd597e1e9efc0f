#include "sketchrl/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sketchrl/errors.hpp"
#include "sketchrl/return_distribution.hpp"

namespace sketchrl {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::yes: return "yes";
        case Verdict::no: return "no";
        case Verdict::unknown: return "unknown";
    }
    return "unknown";
}

// ---- witnesses ------------------------------------------------------------------

namespace {

CategoricalDistribution mix2(double nu, const CategoricalDistribution& a, const CategoricalDistribution& b) {
    const std::pair<double, CategoricalDistribution> parts[] = {{nu, a}, {1.0 - nu, b}};
    return CategoricalDistribution::mixture(parts);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return a.size() == b.size() ? d : std::numeric_limits<double>::infinity();
}

CategoricalDistribution random_distribution(Rng& rng, int max_atoms = 4) {
    const int n = 1 + static_cast<int>(uniform_index(static_cast<std::size_t>(max_atoms), rng));
    std::vector<double> atoms(n), weights(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        atoms[i] = uniform01(rng);
        weights[i] = 0.05 + uniform01(rng);
        total += weights[i];
    }
    double acc = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        weights[i] /= total;
        acc += weights[i];
    }
    weights[n - 1] = 1.0 - acc;
    return CategoricalDistribution(std::move(atoms), std::move(weights));
}

}  // namespace

CategoricalDistribution WitnessPair::mixture() const { return mix2(nu, eta1, eta2); }
CategoricalDistribution WitnessPair::mixture_prime() const { return mix2(nu, eta1p, eta2p); }

bool WitnessPair::components_match(double tol) const {
    return max_abs_diff(compute_sketch(eta1, spec), compute_sketch(eta1p, spec)) <= tol &&
           max_abs_diff(compute_sketch(eta2, spec), compute_sketch(eta2p, spec)) <= tol;
}

double WitnessPair::mixture_gap() const {
    return max_abs_diff(compute_sketch(mixture(), spec), compute_sketch(mixture_prime(), spec));
}

WitnessPair median_witness(double k, double k_prime) {
    const CategoricalDistribution z({0.0, 1.0}, {0.2, 0.8});
    return WitnessPair{0.5,
                       z,
                       CategoricalDistribution({0.0, k}, {0.6, 0.4}),
                       z,
                       CategoricalDistribution({0.0, k_prime}, {0.6, 0.4}),
                       SketchSpec::median()};
}

WitnessPair quantile_witness(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw BadParams("alpha must be in (0, 1)");
    // Y puts α + ε at 0 and ε on each of y_1, y_2; Z = p_{z_0} δ_0 + (1 - p_{z_0}) δ_1
    // with p_{z_0} chosen so the mixture CDF crosses α exactly at y_n.
    const double eps = std::min(alpha, 1.0 - alpha) / 4.0;
    CounterexampleParams params;
    params.alpha = alpha;
    params.y_atoms = {0.25, 0.5, 0.75};
    params.y_weights = {alpha + eps, eps, eps, 1.0 - alpha - 3.0 * eps};
    params.margin = eps / 10.0;
    const CategoricalDistribution y({0.0, 0.25, 0.5, 0.75}, params.y_weights);
    auto z_for = [&](int n) {
        params.target_index = n;
        const double pz0 = quantile_witness_pz0(params);
        return CategoricalDistribution({0.0, 1.0}, {pz0, 1.0 - pz0});
    };
    return WitnessPair{0.5, y, z_for(1), y, z_for(2), SketchSpec::quantile(alpha)};
}

WitnessPair variance_witness(double k, double k_prime) {
    const CategoricalDistribution z({0.0, 2.0}, {0.5, 0.5});
    return WitnessPair{0.5,
                       z,
                       CategoricalDistribution({k, k + 2.0}, {0.5, 0.5}),
                       z,
                       CategoricalDistribution({k_prime, k_prime + 2.0}, {0.5, 0.5}),
                       SketchSpec::variance()};
}

// ---- mixture consistency ----------------------------------------------------------

namespace {

// Closed-form h_ψ(ψ(η1), ψ(η2), ν) for the kinds where one exists.
std::optional<std::vector<double>> mixing_function(const SketchSpec& spec, const std::vector<double>& a,
                                                   const std::vector<double>& b, double nu) {
    switch (spec.kind) {
        case SketchKind::moments:
        case SketchKind::categorical: {
            std::vector<double> out(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = nu * a[i] + (1.0 - nu) * b[i];
            return out;
        }
        case SketchKind::central_moments:
        case SketchKind::mean_variance: {
            const auto ma = central_to_moments(a[0], std::span<const double>(a).subspan(1));
            const auto mb = central_to_moments(b[0], std::span<const double>(b).subspan(1));
            const std::pair<double, MomentSketch> parts[] = {{nu, ma}, {1.0 - nu, mb}};
            const auto mixed = mixture_moments(parts);
            std::vector<double> out{mixed[1]};
            for (double c : moments_to_central(mixed)) out.push_back(c);
            return out;
        }
        case SketchKind::max:
        case SketchKind::min: {
            if (nu == 0.0) return b;
            if (nu == 1.0) return a;
            return std::vector<double>{spec.kind == SketchKind::max ? std::max(a[0], b[0]) : std::min(a[0], b[0])};
        }
        case SketchKind::exp_utility: {
            const double l = spec.lambda;
            const double top = std::max(l * a[0], l * b[0]);
            const double s = nu * std::exp(l * a[0] - top) + (1.0 - nu) * std::exp(l * b[0] - top);
            return std::vector<double>{(top + std::log(s)) / l};
        }
        default: return std::nullopt;
    }
}

}  // namespace

MixtureConsistencyResult check_mixture_consistency(const SketchSpec& spec, std::uint64_t seed) {
    spec.validate();
    MixtureConsistencyResult res;
    switch (spec.kind) {
        case SketchKind::median:
            res.verdict = Verdict::no;
            res.witness = median_witness();
            res.check_id = "median-witness";
            return res;
        case SketchKind::quantile:
            res.verdict = Verdict::no;
            res.witness = quantile_witness(spec.alpha);
            res.check_id = "quantile-witness";
            return res;
        case SketchKind::variance:
            res.verdict = Verdict::no;
            res.witness = variance_witness();
            res.check_id = "variance-witness";
            return res;
        default: break;
    }

    Rng rng = make_stream(seed, {0x6d6978});
    constexpr int kTrials = 1000;
    for (int t = 0; t < kTrials; ++t) {
        const auto e1 = random_distribution(rng);
        const auto e2 = random_distribution(rng);
        const double nu = uniform01(rng);
        const auto predicted = *mixing_function(spec, compute_sketch(e1, spec), compute_sketch(e2, spec), nu);
        const auto actual = compute_sketch(mix2(nu, e1, e2), spec);
        res.max_error = std::max(res.max_error, max_abs_diff(predicted, actual));
    }
    res.trials = kTrials;
    res.verdict = res.max_error < 1e-10 ? Verdict::yes : Verdict::unknown;
    switch (spec.kind) {
        case SketchKind::moments: res.check_id = "linearity"; break;
        case SketchKind::categorical: res.check_id = "linearity"; break;
        case SketchKind::central_moments:
        case SketchKind::mean_variance: res.check_id = "variance-under-mean"; break;
        case SketchKind::max:
        case SketchKind::min: res.check_id = "extremes"; break;
        case SketchKind::exp_utility: res.check_id = "exponential-linearity"; break;
        default: break;
    }
    return res;
}

MixtureConsistencyResult check_mixture_consistency(const SketchFunction& sketch, std::uint64_t seed) {
    (void)seed;  // the search is exhaustive over its grid
    MixtureConsistencyResult res;
    res.check_id = "bounded-witness-search";

    std::vector<CategoricalDistribution> family;
    const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double x : grid) family.push_back(CategoricalDistribution::dirac(x));
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j)
            for (int w = 1; w <= 9; ++w)
                family.emplace_back(std::vector<double>{grid[i], grid[j]},
                                    std::vector<double>{w / 10.0, 1.0 - w / 10.0});

    std::map<std::vector<long long>, std::vector<std::size_t>> buckets;
    std::vector<std::vector<double>> sketches;
    for (std::size_t i = 0; i < family.size(); ++i) {
        sketches.push_back(sketch(family[i]));
        std::vector<long long> key;
        for (double v : sketches.back()) key.push_back(std::llround(v * 1e9));
        buckets[key].push_back(i);
    }

    const double nus[] = {0.5, 0.25, 0.75};
    for (const auto& [key, members] : buckets)
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                const auto& e1 = family[members[a]];
                const auto& e1p = family[members[b]];
                if (max_abs_diff(sketches[members[a]], sketches[members[b]]) > 1e-10) continue;
                for (const auto& e2 : family)
                    for (double nu : nus) {
                        ++res.trials;
                        const double gap = max_abs_diff(sketch(mix2(nu, e1, e2)), sketch(mix2(nu, e1p, e2)));
                        if (gap > 1e-6) {
                            res.verdict = Verdict::no;
                            res.max_error = gap;
                            // the spec field is informational for custom sketches
                            res.witness = WitnessPair{nu, e1, e2, e1p, e2, SketchSpec::moments(1)};
                            return res;
                        }
                    }
            }
    res.verdict = Verdict::unknown;
    return res;
}

// ---- Bellman closedness -----------------------------------------------------------

ClosednessResult check_bellman_closedness(const SketchSpec& spec, std::span<const PolicyInstance> instances,
                                          double tol) {
    spec.validate();
    ClosednessResult res;
    for (const auto& inst : instances) {
        ++res.instances;
        const auto& mdp = inst.mdp;
        const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
        const auto exact = exact_return_distribution(mdp, inst.policy);

        std::vector<std::vector<double>> next_v(S, compute_sketch(CategoricalDistribution::dirac(0.0), spec));
        std::vector<SketchTransition> next;
        for (int h = H - 1; h >= 0; --h) {
            std::vector<std::vector<double>> q(static_cast<std::size_t>(S) * A);
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    next.clear();
                    const auto p = mdp.transition(h, s, a);
                    for (int sp = 0; sp < S; ++sp)
                        if (p[sp] > 0.0) next.emplace_back(p[sp], next_v[sp]);
                    auto& out = q[static_cast<std::size_t>(s) * A + a];
                    try {
                        out = spec.kind == SketchKind::categorical
                                  ? categorical_projected_backup(spec, next, mdp.reward(h, s, a))
                                  : sketch_bellman_backup(spec, next, mdp.reward(h, s, a));
                    } catch (const NotBellmanClosed&) {
                        res.raised_not_closed = true;
                        res.verdict = Verdict::no;
                        return res;
                    }
                    res.max_error = std::max(res.max_error,
                                             max_abs_diff(out, compute_sketch(exact.q(h, s, a), spec)));
                }
            for (int s = 0; s < S; ++s) next_v[s] = q[static_cast<std::size_t>(s) * A + inst.policy.action(h, s)];
        }
    }
    res.verdict = res.max_error < tol ? Verdict::yes : Verdict::no;
    return res;
}

// ---- Bellman unbiasedness -----------------------------------------------------------

UnbiasednessResult check_bellman_unbiasedness(const SketchSpec& spec, Combiner combiner, const EpisodicMdp& mdp,
                                              int k, int trials, Rng& rng) {
    spec.validate();
    check_combiner(spec, combiner);
    if (k < 1 || trials < 2) throw BadParams("need k >= 1 and trials >= 2");

    if (mdp.horizon() < 2) throw BadParams("unbiasedness check needs H >= 2");
    const auto pi = Policy::constant(mdp.horizon(), mdp.num_states());
    const auto exact = exact_return_distribution(mdp, pi);
    const double r = mdp.reward(0, 0, 0);
    const auto p = mdp.transition(0, 0, 0);
    std::vector<std::vector<double>> successor(mdp.num_states());
    for (int sp = 0; sp < mdp.num_states(); ++sp)
        if (p[sp] > 0.0) successor[sp] = compute_sketch(exact.v(1, sp).shifted(r), spec);

    UnbiasednessResult res;
    res.k = k;
    res.trials = trials;
    res.target = compute_sketch(exact.q(0, 0, 0), spec);
    const std::size_t dim = res.target.size();

    // Welford accumulators per component
    std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
    std::vector<std::vector<double>> draw(static_cast<std::size_t>(k));
    for (int t = 0; t < trials; ++t) {
        for (int i = 0; i < k; ++i) draw[i] = successor[sample_index(p, rng)];
        const auto est = combine_sketches(spec, combiner, draw);
        for (std::size_t c = 0; c < dim; ++c) {
            const double delta = est[c] - mean[c];
            mean[c] += delta / (t + 1);
            m2[c] += delta * (est[c] - mean[c]);
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        const double bias = mean[c] - res.target[c];
        const double se = std::sqrt(m2[c] / (trials - 1) / trials);
        double z;
        if (std::abs(bias) <= 1e-12 * std::max(1.0, std::abs(res.target[c])))
            z = 0.0;
        else if (se == 0.0)
            z = bias > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        else
            z = bias / se;
        res.bias.push_back(bias);
        res.z.push_back(z);
        res.max_abs_z = std::max(res.max_abs_z, std::abs(z));
    }
    return res;
}

// ---- classification ----------------------------------------------------------------

std::string region_label(Verdict bc, Verdict bu) {
    if (bc == Verdict::yes && bu == Verdict::yes) return "BU∩BC";
    if (bc == Verdict::yes && bu == Verdict::no) return "A";
    if (bc == Verdict::no && bu == Verdict::yes) return "BU-not-BC";
    if (bc == Verdict::no && bu == Verdict::no) return "B";
    return "unknown";
}

std::vector<std::pair<SketchSpec, Combiner>> classification_suite() {
    std::vector<double> grid;
    for (int i = 0; i <= 8; ++i) grid.push_back(0.5 * i);
    return {
        {SketchSpec::moments(4), Combiner::average},
        {SketchSpec::central_moments(3), Combiner::central_u_statistic},
        {SketchSpec::mean_variance(), Combiner::mean_variance},
        {SketchSpec::variance(), Combiner::average},
        {SketchSpec::quantile(0.25), Combiner::average},
        {SketchSpec::median(), Combiner::average},
        {SketchSpec::max(), Combiner::extreme},
        {SketchSpec::min(), Combiner::extreme},
        {SketchSpec::categorical(grid), Combiner::average},
        {SketchSpec::exp_utility(1.0), Combiner::average},
    };
}

std::vector<EpisodicMdp> unbiasedness_mdps() {
    std::vector<EpisodicMdp> out;
    CounterexampleParams a;
    a.terminal_rewards = {0.0, 1.0};
    a.terminal_weights = {0.5, 0.5};
    out.push_back(make_counterexample_mdp(CounterexampleKind::two_stage_general, a));
    CounterexampleParams b;
    b.terminal_rewards = {0.0, 0.3, 0.8, 1.0};
    b.terminal_weights = {0.1, 0.4, 0.3, 0.2};
    out.push_back(make_counterexample_mdp(CounterexampleKind::two_stage_general, b));
    CounterexampleParams c;
    c.gamma = 0.6;
    c.K = 3;
    c.grid_points = 4;
    out.push_back(make_counterexample_mdp(CounterexampleKind::max_min_demo, c));
    return out;
}

std::vector<PolicyInstance> random_policy_instances(int count, std::uint64_t seed) {
    std::vector<PolicyInstance> out;
    Rng rng = make_stream(seed, {0x696e7374});
    for (int i = 0; i < count; ++i) {
        const int S = 1 + static_cast<int>(uniform_index(4, rng));
        const int A = 1 + static_cast<int>(uniform_index(2, rng));
        const int H = 1 + static_cast<int>(uniform_index(4, rng));
        auto mdp = random_mdp(S, A, H, rng(), 0.2);
        std::vector<int> table(static_cast<std::size_t>(H) * S);
        for (auto& a : table) a = static_cast<int>(uniform_index(static_cast<std::size_t>(A), rng));
        out.push_back(PolicyInstance{std::move(mdp), Policy(H, S, std::move(table))});
    }
    return out;
}

namespace {

int min_samples(const SketchSpec& spec, Combiner c) {
    return c == Combiner::central_u_statistic ? static_cast<int>(spec.dimension()) : 1;
}

nlohmann::json number(double x) {
    if (std::isfinite(x)) return x;
    return x > 0 ? "inf" : "-inf";
}

nlohmann::json distribution_json(const CategoricalDistribution& d) {
    return {{"atoms", d.atoms()}, {"weights", d.weights()}};
}

}  // namespace

ClassificationReport classify_functionals(const ClassificationConfig& cfg) {
    ClassificationReport report;
    const auto mdps = unbiasedness_mdps();
    const auto instances = random_policy_instances(cfg.closedness_instances, cfg.seed);
    std::uint64_t stream = 0;
    for (const auto& [spec, combiner] : classification_suite()) {
        KindReport kr;
        kr.spec = spec;
        kr.combiner = combiner;
        kr.mixture = check_mixture_consistency(spec, cfg.seed);
        kr.closedness = check_bellman_closedness(spec, instances);
        bool biased = false;
        for (std::size_t m = 0; m < mdps.size(); ++m)
            for (int k : cfg.ks) {
                if (k < min_samples(spec, combiner)) continue;
                Rng rng = make_stream(cfg.seed, {++stream});
                auto res = check_bellman_unbiasedness(spec, combiner, mdps[m], k, cfg.trials, rng);
                kr.worst_abs_z = std::max(kr.worst_abs_z, res.max_abs_z);
                biased = biased || res.max_abs_z > cfg.z_threshold;
                kr.unbiasedness.push_back(std::move(res));
            }
        kr.bellman_unbiased = biased ? Verdict::no : Verdict::yes;
        kr.region = region_label(kr.closedness.verdict, kr.bellman_unbiased);
        report.kinds.push_back(std::move(kr));
    }
    return report;
}

nlohmann::json ClassificationReport::regions() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& k : kinds) out[to_string(k.spec.kind)] = k.region;
    return out;
}

nlohmann::json ClassificationReport::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& k : kinds) {
        nlohmann::json mix = {{"verdict", to_string(k.mixture.verdict)},
                              {"check", k.mixture.check_id},
                              {"trials", k.mixture.trials},
                              {"max_error", k.mixture.max_error}};
        if (k.mixture.witness) {
            const auto& w = *k.mixture.witness;
            mix["witness"] = {{"nu", w.nu},
                              {"eta1", distribution_json(w.eta1)},
                              {"eta2", distribution_json(w.eta2)},
                              {"eta1p", distribution_json(w.eta1p)},
                              {"eta2p", distribution_json(w.eta2p)},
                              {"mixture_sketch", compute_sketch(w.mixture(), w.spec)},
                              {"mixture_prime_sketch", compute_sketch(w.mixture_prime(), w.spec)},
                              {"gap", w.mixture_gap()}};
        }
        nlohmann::json unb = nlohmann::json::array();
        for (const auto& u : k.unbiasedness) {
            nlohmann::json z = nlohmann::json::array();
            for (double v : u.z) z.push_back(number(v));
            unb.push_back({{"k", u.k}, {"trials", u.trials}, {"target", u.target}, {"bias", u.bias}, {"z", z}});
        }
        list.push_back({{"sketch", k.spec.name()},
                        {"kind", to_string(k.spec.kind)},
                        {"combiner", to_string(k.combiner)},
                        {"mixture_consistent", mix},
                        {"bellman_closed",
                         {{"verdict", to_string(k.closedness.verdict)},
                          {"max_error", k.closedness.max_error},
                          {"raised_not_closed", k.closedness.raised_not_closed},
                          {"instances", k.closedness.instances}}},
                        {"bellman_unbiased",
                         {{"verdict", to_string(k.bellman_unbiased)},
                          {"worst_abs_z", number(k.worst_abs_z)},
                          {"runs", unb}}},
                        {"region", k.region}});
    }
    return {{"kinds", list}, {"regions", regions()}};
}

nlohmann::json golden_regions() {
    return {
        {"moments", "BU∩BC"},   {"central_moments", "BU∩BC"}, {"mean_variance", "BU∩BC"},
        {"variance", "B"},      {"quantile", "B"},             {"median", "B"},
        {"max", "A"},           {"min", "A"},                  {"categorical", "BU-not-BC"},
        {"exp_utility", "A"},
    };
}

}  // namespace sketchrl
