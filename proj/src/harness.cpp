#include "sketchrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "sketchrl/errors.hpp"
#include "sketchrl/io.hpp"
#include "sketchrl/rng.hpp"

#ifndef SKETCHRL_GIT_DESCRIBE
#define SKETCHRL_GIT_DESCRIBE "unknown"
#endif

namespace sketchrl {

namespace {

constexpr double kOptimismTol = 1e-6;
constexpr double kDecompositionTol = 1e-9;
constexpr int kFlushEvery = 50;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds must be nonempty");
    if (agent != "sf_lsvi" && agent != "lsvi_ucb" && agent != "random" && agent != "oracle")
        throw ConfigError("unknown agent '" + agent + "'");
    try {
        PlanningConfig p = planning;
        if (!(p.T > 0.0)) p.T = 1.0;
        p.validate();
    } catch (const BadParams& e) {
        throw ConfigError(e.what());
    }
}

EpisodicMdp build_mdp(const MdpSource& src) {
    if (!src.path.empty()) return mdp_from_json(read_json_file(src.path));
    const auto& p = src.params;
    try {
        if (src.builtin == "chain")
            return chain_mdp(p.value("S", 5), p.value("H", 5), p.value("slip", 0.1), p.value("distractor", 0.05));
        if (src.builtin == "random")
            return random_mdp(p.value("S", 4), p.value("A", 2), p.value("H", 4), p.value("seed", std::uint64_t{0}),
                              p.value("reward_sparsity", 0.0));
        if (src.builtin == "gridworld")
            return gridworld(p.value("width", 3), p.value("height", 3), p.value("H", 6));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mdp params: ") + e.what());
    }
    throw ConfigError("unknown builtin mdp '" + src.builtin + "'");
}

ValueTables uniform_policy_values(const EpisodicMdp& mdp) {
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    ValueTables v(H, S, A);
    for (int h = H - 1; h >= 0; --h)
        for (int s = 0; s < S; ++s) {
            double total = 0.0;
            for (int a = 0; a < A; ++a) {
                v.q(h, s, a) = mdp.reward(h, s, a) + v.expected_next(mdp, h, s, a);
                total += v.q(h, s, a);
            }
            v.v(h, s) = total / A;
        }
    return v;
}

double RunRecord::optimism_violation_rate() const {
    return visited_steps == 0 ? 0.0 : static_cast<double>(optimism_violations) / visited_steps;
}

double RunRecord::decomposition_pass_rate() const {
    return episodes.empty() ? 1.0
                            : 1.0 - static_cast<double>(decomposition_failures) / static_cast<double>(episodes.size());
}

std::vector<double> RunRecord::cumulative_regret() const {
    std::vector<double> out;
    out.reserve(episodes.size());
    for (const auto& e : episodes) out.push_back(e.cum_regret);
    return out;
}

RunRecord run_single(const ExperimentConfig& cfg, const EpisodicMdp& mdp, std::uint64_t seed, std::ostream* csv) {
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    const auto [star, pi_star] = optimal_values(mdp);
    const bool learner = cfg.agent == "sf_lsvi" || cfg.agent == "lsvi_ucb";

    PlanningConfig planning = cfg.planning;
    if (!(planning.T > 0.0)) planning.T = static_cast<double>(cfg.K) * H;
    if (cfg.agent == "lsvi_ucb") planning.N = 1;
    std::optional<AgentState> state;
    if (learner) state.emplace(H, S, A, planning);
    const ValueTables uniform = uniform_policy_values(mdp);

    RunRecord run;
    run.seed = seed;
    run.episodes.reserve(static_cast<std::size_t>(cfg.K));
    if (csv) write_csv_header(*csv);

    double cum = 0.0;
    for (int k = 1; k <= cfg.K; ++k) {
        const auto ku = static_cast<std::uint64_t>(k);
        std::optional<PlanResult> plan;
        if (learner) {
            plan = cfg.agent == "lsvi_ucb" ? lsvi_ucb_plan(*state, planning) : sf_lsvi_plan(*state, planning);
            run.empty_region_warnings += plan->empty_region_warnings;
        }
        const Policy& policy = learner ? plan->policy : pi_star;

        Rng init_rng = make_stream(cfg.master_seed, {seed, ku, 0});
        const int s1 = sample_initial_state(mdp, init_rng);

        EpisodeRecord rec;
        rec.episode = k;
        int s = s1;
        std::vector<int> states{s1}, actions;
        for (int h = 0; h < H; ++h) {
            Rng rng = make_stream(cfg.master_seed, {seed, ku, static_cast<std::uint64_t>(h) + 1});
            const int a = cfg.agent == "random" ? static_cast<int>(uniform_index(static_cast<std::size_t>(A), rng))
                                                : (learner ? act(*plan, h, s) : policy.action(h, s));
            const double r = mdp.reward(h, s, a);
            const int next = sample_transition(mdp, h, s, a, rng);
            rec.realized_return += r;
            if (learner) {
                state->record_transition(k, h, s, a, r, next);
                if (cfg.bonus_mass) rec.bonus_mass += plan->b(h, s, a);
                if (cfg.optimism_audit && plan->values.q(h, s, a) < star.q(h, s, a) - kOptimismTol)
                    ++rec.optimism_violations;
            }
            actions.push_back(a);
            states.push_back(next);
            s = next;
        }

        rec.v_star = star.v(0, s1);
        if (cfg.agent == "random") {
            rec.v_pik = uniform.v(0, s1);
        } else {
            rec.v_pik = evaluate_policy(mdp, policy).v(0, s1);
        }
        rec.inst_regret = rec.v_star - rec.v_pik;
        cum += rec.inst_regret;
        rec.cum_regret = cum;

        if (learner) {
            // V^k - V^{π^k} telescopes into Bellman errors plus a martingale residual.
            const ValueTables vpi = evaluate_policy(mdp, policy);
            double residual = 0.0, bonus2 = 0.0;
            for (int h = 0; h < H; ++h) {
                const int sh = states[static_cast<std::size_t>(h)], ah = actions[static_cast<std::size_t>(h)];
                const int sn = states[static_cast<std::size_t>(h) + 1];
                const double gap_next = plan->values.v(h + 1, sn) - vpi.v(h + 1, sn);
                residual += plan->values.expected_next(mdp, h, sh, ah) - vpi.expected_next(mdp, h, sh, ah) - gap_next;
                bonus2 += 2.0 * plan->b(h, sh, ah);
            }
            rec.planned_value = plan->values.v(0, s1);
            rec.martingale_residual = residual;
            const double lhs = rec.planned_value - vpi.v(0, s1) - residual;
            rec.decomposition_holds = lhs <= bonus2 + kDecompositionTol;
            if (!rec.decomposition_holds) ++run.decomposition_failures;
            run.visited_steps += H;
            run.optimism_violations += rec.optimism_violations;
            run.total_bonus_mass += rec.bonus_mass;
        }

        run.episodes.push_back(rec);
        if (csv) {
            write_csv_row(*csv, rec);
            if (k % kFlushEvery == 0) csv->flush();
        }
    }
    if (csv) csv->flush();
    return run;
}

double ExperimentSummary::mean_final_regret() const {
    if (runs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : runs) total += r.final_regret();
    return total / static_cast<double>(runs.size());
}

double ExperimentSummary::se_final_regret() const {
    if (runs.size() < 2) return 0.0;
    const double mean = mean_final_regret();
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.final_regret() - mean) * (r.final_regret() - mean);
    const double n = static_cast<double>(runs.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

std::vector<double> ExperimentSummary::mean_cumulative_regret() const {
    if (runs.empty()) return {};
    std::vector<double> mean(runs.front().episodes.size(), 0.0);
    for (const auto& r : runs)
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += r.episodes[k].cum_regret;
    for (auto& m : mean) m /= static_cast<double>(runs.size());
    return mean;
}

double ExperimentSummary::optimism_violation_rate() const {
    long visited = 0, violations = 0;
    for (const auto& r : runs) {
        visited += r.visited_steps;
        violations += r.optimism_violations;
    }
    return visited == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(visited);
}

nlohmann::json ExperimentSummary::to_json() const {
    nlohmann::json j;
    j["git_describe"] = git_describe();
    j["master_seed"] = master_seed;
    j["config"] = config;
    const std::size_t K = runs.empty() ? 0 : runs.front().episodes.size();
    j["episodes"] = K;
    nlohmann::json runs_json = nlohmann::json::array();
    for (const auto& r : runs) {
        nlohmann::json rj;
        rj["seed"] = r.seed;
        rj["final_regret"] = r.final_regret();
        rj["optimism_violation_rate"] = r.optimism_violation_rate();
        rj["decomposition_pass_rate"] = r.decomposition_pass_rate();
        rj["total_bonus_mass"] = r.total_bonus_mass;
        rj["empty_region_warnings"] = r.empty_region_warnings;
        if (r.episodes.size() >= 100) {
            const RegretFit f = fit_regret_exponent(r.cumulative_regret());
            rj["fit"] = {{"a", f.a}, {"b", f.b}, {"r2", f.r2}};
        } else {
            rj["fit"] = nullptr;
        }
        runs_json.push_back(rj);
    }
    j["runs"] = runs_json;
    j["mean_final_regret"] = mean_final_regret();
    j["se_final_regret"] = se_final_regret();
    j["optimism_violation_rate"] = optimism_violation_rate();
    if (K >= 100) {
        const RegretFit f = fit_regret_exponent(mean_cumulative_regret());
        j["fit"] = {{"a", f.a}, {"b", f.b}, {"r2", f.r2}};
    } else {
        j["fit"] = nullptr;
    }
    return j;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const EpisodicMdp mdp = build_mdp(cfg.mdp);
    ExperimentSummary summary;
    summary.config = experiment_config_to_json(cfg);
    summary.master_seed = cfg.master_seed;

    const std::filesystem::path dir(cfg.out_dir);
    if (!cfg.out_dir.empty()) std::filesystem::create_directories(dir);

    auto one = [&](std::uint64_t seed) {
        if (cfg.out_dir.empty()) return run_single(cfg, mdp, seed, nullptr);
        const auto path = dir / ("run_" + std::to_string(seed) + ".csv");
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + path.string());
        return run_single(cfg, mdp, seed, &os);
    };

    if (cfg.parallel && cfg.seeds.size() > 1) {
        std::vector<std::future<RunRecord>> futures;
        for (auto seed : cfg.seeds) futures.push_back(std::async(std::launch::async, one, seed));
        for (auto& f : futures) summary.runs.push_back(f.get());
    } else {
        for (auto seed : cfg.seeds) summary.runs.push_back(one(seed));
    }

    if (!cfg.out_dir.empty()) emit_summary_json(summary, (dir / "summary.json").string());
    return summary;
}

std::vector<RegretPoint> compute_regret(const EpisodicMdp& mdp, std::span<const Policy> policies,
                                        std::span<const int> initial_states) {
    if (policies.size() != initial_states.size())
        throw BadDimensions("need one initial state per policy");
    const auto star = optimal_values(mdp).first;
    std::vector<RegretPoint> out;
    out.reserve(policies.size());
    double cum = 0.0;
    for (std::size_t k = 0; k < policies.size(); ++k) {
        policies[k].check_against(mdp);
        const int s1 = initial_states[k];
        mdp.check_indices(0, s1, 0);
        RegretPoint p;
        p.v_star = star.v(0, s1);
        p.v_pik = evaluate_policy(mdp, policies[k]).v(0, s1);
        p.inst_regret = p.v_star - p.v_pik;
        cum += p.inst_regret;
        p.cum_regret = cum;
        out.push_back(p);
    }
    return out;
}

RegretFit fit_regret_exponent(std::span<const double> cumulative_regret) {
    const std::size_t K = cumulative_regret.size();
    if (K < 100) throw TooFewEpisodes("need at least 100 episodes, got " + std::to_string(K));
    std::vector<double> xs, ys;
    for (std::size_t k = K / 2 + 1; k <= K; ++k) {
        const double reg = cumulative_regret[k - 1];
        if (reg <= 0.0) continue;
        xs.push_back(std::log(static_cast<double>(k)));
        ys.push_back(std::log(reg));
    }
    if (xs.size() < 2) return {0.0, 0.0, 1.0};
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    RegretFit fit;
    fit.b = sxy / sxx;
    fit.a = std::exp(my - fit.b * mx);
    // A flat tail leaves only rounding noise in syy; the constant fit is then exact.
    const bool flat = syy <= 1e-20 * n * std::max(1.0, my * my);
    fit.r2 = flat ? 1.0 : (sxy * sxy) / (sxx * syy);
    if (flat) {
        fit.b = 0.0;
        fit.a = std::exp(my);
    }
    return fit;
}

void write_csv_header(std::ostream& os) { os << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& os, const EpisodeRecord& rec) {
    os << rec.episode << ',' << fmt(rec.realized_return) << ',' << fmt(rec.v_star) << ',' << fmt(rec.v_pik) << ','
       << fmt(rec.inst_regret) << ',' << fmt(rec.cum_regret) << ',' << fmt(rec.bonus_mass) << ','
       << rec.optimism_violations << '\n';
}

void emit_csv(const RunRecord& record, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_csv_header(os);
    for (const auto& rec : record.episodes) write_csv_row(os, rec);
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<EpisodeRecord> read_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw ConfigError("unexpected CSV header in " + path);
    std::vector<EpisodeRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw ConfigError("malformed CSV row: " + line);
        EpisodeRecord rec;
        rec.episode = std::stoi(cells[0]);
        rec.realized_return = std::stod(cells[1]);
        rec.v_star = std::stod(cells[2]);
        rec.v_pik = std::stod(cells[3]);
        rec.inst_regret = std::stod(cells[4]);
        rec.cum_regret = std::stod(cells[5]);
        rec.bonus_mass = std::stod(cells[6]);
        rec.optimism_violations = std::stoi(cells[7]);
        out.push_back(rec);
    }
    return out;
}

void emit_summary_json(const ExperimentSummary& summary, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << summary.to_json().dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string git_describe() { return SKETCHRL_GIT_DESCRIBE; }

}  // namespace sketchrl
