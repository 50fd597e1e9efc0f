// sketchrl command-line front end.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sketchrl/errors.hpp"
#include "sketchrl/harness.hpp"
#include "sketchrl/io.hpp"
#include "sketchrl/return_distribution.hpp"
#include "sketchrl/verifier.hpp"

using namespace sketchrl;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

bool is_config_error(const Error& e) {
    return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const BadDimensions*>(&e) ||
           dynamic_cast<const InvalidStochasticRow*>(&e) || dynamic_cast<const RewardOutOfRange*>(&e) ||
           dynamic_cast<const IndexOutOfRange*>(&e) || dynamic_cast<const BadParams*>(&e) ||
           dynamic_cast<const BadSpec*>(&e) || dynamic_cast<const BadCombiner*>(&e) ||
           dynamic_cast<const InvalidDistribution*>(&e);
}

void write_or_print(const json& j, const std::string& path) {
    if (path.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path);
    os << j.dump(2) << '\n';
}

int cmd_run(const std::string& config_path, const std::string& out) {
    ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
    apply_env_overrides(cfg);
    if (!out.empty()) cfg.out_dir = out;
    if (cfg.out_dir.empty()) cfg.out_dir = "results";
    const ExperimentSummary summary = run_experiment(cfg);
    const json j = summary.to_json();
    std::printf("agent %s  K %d  seeds %zu  master seed %llu\n", cfg.agent.c_str(), cfg.K, cfg.seeds.size(),
                static_cast<unsigned long long>(cfg.master_seed));
    std::printf("Reg(K) = %.4f +- %.4f\n", summary.mean_final_regret(), summary.se_final_regret());
    if (!j["fit"].is_null())
        std::printf("fit: Reg(k) ~ %.4g k^%.3f  (r2 %.4f)\n", j["fit"]["a"].get<double>(),
                    j["fit"]["b"].get<double>(), j["fit"]["r2"].get<double>());
    std::printf("optimism violation rate %.4f\n", summary.optimism_violation_rate());
    std::printf("wrote %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_verify(const std::string& out, int trials) {
    ClassificationConfig cfg;
    if (trials > 0) cfg.trials = trials;
    const ClassificationReport report = classify_functionals(cfg);
    const json regions = report.regions();
    const json golden = golden_regions();
    for (const auto& k : report.kinds)
        std::printf("%-18s closed=%-7s unbiased=%-7s max|z|=%-8.3f region=%s\n", k.spec.name().c_str(),
                    to_string(k.closedness.verdict).c_str(), to_string(k.bellman_unbiased).c_str(), k.worst_abs_z,
                    k.region.c_str());
    if (!out.empty()) write_or_print(report.to_json(), out);
    const bool match = regions == golden;
    std::printf("%s\n", match ? "regions match the expected table" : "regions DIFFER from the expected table");
    return match ? 0 : 1;
}

int cmd_oracle(const std::string& mdp_path, const std::string& policy_path, int N) {
    const EpisodicMdp mdp = mdp_from_json(read_json_file(mdp_path));
    const Policy pi = policy_from_json(read_json_file(policy_path));
    pi.check_against(mdp);
    const ReturnDistributions dists = exact_return_distribution(mdp, pi);
    const CategoricalDistribution z = initial_return_distribution(mdp, dists);
    json j;
    j["return_distribution"] = distribution_to_json(z);
    json sketches;
    for (const SketchSpec& spec : {SketchSpec::moments(N), SketchSpec::mean_variance(), SketchSpec::median(),
                                   SketchSpec::quantile(0.25), SketchSpec::max(), SketchSpec::min(),
                                   SketchSpec::exp_utility(1.0)})
        sketches[spec.name()] = compute_sketch(z, spec);
    j["sketches"] = sketches;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_eluder(const std::string& class_path, double eps, bool exact) {
    const EnumeratedFunctionClass cls = enumerated_class_from_json(read_json_file(class_path));
    const int dim = eluder_dimension(cls, eps, exact ? EluderMode::exact : EluderMode::greedy);
    std::cout << json{{"eps", eps}, {"mode", exact ? "exact" : "greedy"}, {"eluder_dimension", dim}}.dump() << '\n';
    return 0;
}

int cmd_optimal(const std::string& mdp_path) {
    const EpisodicMdp mdp = mdp_from_json(read_json_file(mdp_path));
    const auto [values, pi] = optimal_values(mdp);
    json v = json::array();
    for (int h = 0; h <= mdp.horizon(); ++h) {
        json row = json::array();
        for (int s = 0; s < mdp.num_states(); ++s) row.push_back(values.v(h, s));
        v.push_back(row);
    }
    json out = policy_to_json(pi);
    out["V"] = v;
    out["initial_value"] = initial_value(mdp, values);
    std::cout << out.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Statistical-functional sketches, verifier and SF-LSVI experiments"};
    app.require_subcommand(1);

    std::string config, out, mdp_path, policy_path, class_path;
    double eps = 0.1;
    bool exact = false;
    int trials = 0, N = 4;

    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory (overrides the config)");

    auto* verify = app.add_subcommand("verify", "Classify the sketch suite and compare with the expected regions");
    verify->add_option("--out", out, "Write the full report here");
    verify->add_option("--trials", trials, "Monte Carlo trials per unbiasedness check");

    auto* oracle = app.add_subcommand("oracle", "Exact return distribution and sketches of a policy");
    oracle->add_option("--mdp", mdp_path)->required()->check(CLI::ExistingFile);
    oracle->add_option("--policy", policy_path)->required()->check(CLI::ExistingFile);
    oracle->add_option("--N", N, "Moment order");

    auto* eluder = app.add_subcommand("eluder", "Eluder dimension of an enumerated class");
    eluder->add_option("--class", class_path)->required()->check(CLI::ExistingFile);
    eluder->add_option("--eps", eps);
    eluder->add_flag("--exact", exact, "Exhaustive search instead of greedy");

    auto* optimal = app.add_subcommand("optimal", "Optimal values and policy");
    optimal->add_option("--mdp", mdp_path)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*run) return cmd_run(config, out);
        if (*verify) return cmd_verify(out, trials);
        if (*oracle) return cmd_oracle(mdp_path, policy_path, N);
        if (*eluder) return cmd_eluder(class_path, eps, exact);
        if (*optimal) return cmd_optimal(mdp_path);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return is_config_error(e) ? kConfigError : kNumericalFailure;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kConfigError;
    }
    return 0;
}
