#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchrl/agent.hpp"
#include "sketchrl/mdp.hpp"

namespace sketchrl {

/// Builtin name plus parameters, or a JSON file holding the MDP.
struct MdpSource {
    std::string builtin = "chain";  // chain | random | gridworld
    nlohmann::json params = nlohmann::json::object();
    std::string path;               // takes precedence when set
};

struct ExperimentConfig {
    MdpSource mdp;
    std::string agent = "sf_lsvi";  // sf_lsvi | lsvi_ucb | random | oracle
    PlanningConfig planning;
    int K = 2000;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::uint64_t master_seed = 0;
    std::string out_dir;            // empty: nothing written
    bool optimism_audit = true;
    bool bonus_mass = true;
    bool parallel = true;           // one thread per seed

    /// Throws ConfigError.
    void validate() const;
};

EpisodicMdp build_mdp(const MdpSource& src);

struct EpisodeRecord {
    int episode = 0;  // 1-based
    double realized_return = 0.0;
    double v_star = 0.0;
    double v_pik = 0.0;
    double inst_regret = 0.0;
    double cum_regret = 0.0;
    double bonus_mass = 0.0;      // Σ_h b^k_h(s^k_h, a^k_h)
    int optimism_violations = 0;  // visited h with Q^k_h < Q*_h - 1e-6
    // regret-decomposition audit
    double planned_value = 0.0;      // V^k_1(s^k_1)
    double martingale_residual = 0.0;
    bool decomposition_holds = true;

    bool operator==(const EpisodeRecord&) const = default;
};

struct RegretFit {
    double a = 0.0;
    double b = 0.0;
    double r2 = 0.0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<EpisodeRecord> episodes;
    int visited_steps = 0;
    int optimism_violations = 0;
    int decomposition_failures = 0;
    double total_bonus_mass = 0.0;
    int empty_region_warnings = 0;

    double final_regret() const { return episodes.empty() ? 0.0 : episodes.back().cum_regret; }
    double optimism_violation_rate() const;
    double decomposition_pass_rate() const;
    std::vector<double> cumulative_regret() const;
};

struct ExperimentSummary {
    nlohmann::json config;
    std::uint64_t master_seed = 0;
    std::vector<RunRecord> runs;

    double mean_final_regret() const;
    double se_final_regret() const;
    /// Per-episode mean of the runs' cumulative regret.
    std::vector<double> mean_cumulative_regret() const;
    double optimism_violation_rate() const;  // pooled over runs
    nlohmann::json to_json() const;
};

/// One independent run. Rows go to `csv` as they are produced, flushed
/// every 50 episodes.
RunRecord run_single(const ExperimentConfig& cfg, const EpisodicMdp& mdp, std::uint64_t seed,
                     std::ostream* csv = nullptr);

/// All seeds; writes run_<seed>.csv and summary.json under out_dir when set.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

struct RegretPoint {
    double v_star = 0.0;
    double v_pik = 0.0;
    double inst_regret = 0.0;
    double cum_regret = 0.0;
};

/// Exact per-episode regret of a policy sequence from the given initial states.
std::vector<RegretPoint> compute_regret(const EpisodicMdp& mdp, std::span<const Policy> policies,
                                        std::span<const int> initial_states);

/// Value table of the uniformly random policy.
ValueTables uniform_policy_values(const EpisodicMdp& mdp);

/// Least squares of log Reg(k) on log k over the second half of the run.
/// Throws TooFewEpisodes when fewer than 100 episodes; an all-zero tail
/// reports b = 0.
RegretFit fit_regret_exponent(std::span<const double> cumulative_regret);

inline constexpr const char* kCsvHeader =
    "episode,realized_return,v_star,v_pik,inst_regret,cum_regret,bonus_mass,optimism_violations";

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const EpisodeRecord& rec);
void emit_csv(const RunRecord& record, const std::string& path);
/// Parses a file written by emit_csv (audit columns are not stored).
std::vector<EpisodeRecord> read_csv(const std::string& path);
void emit_summary_json(const ExperimentSummary& summary, const std::string& path);

/// `git describe` of the source tree at build time.
std::string git_describe();

}  // namespace sketchrl
