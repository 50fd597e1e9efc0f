#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sketchrl/errors.hpp"
#include "sketchrl/harness.hpp"
#include "sketchrl/io.hpp"
#include "sketchrl/mdp.hpp"

using namespace sketchrl;
namespace fs = std::filesystem;

namespace {

ExperimentConfig chain_config(const std::string& agent, int K) {
    ExperimentConfig cfg;
    cfg.mdp.builtin = "chain";
    cfg.mdp.params = {{"S", 4}, {"H", 4}, {"slip", 0.1}};
    cfg.agent = agent;
    cfg.K = K;
    cfg.seeds = {0, 1};
    return cfg;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sketchrl_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("single episode regret is nonnegative") {
    const auto cfg = chain_config("sf_lsvi", 1);
    const auto mdp = build_mdp(cfg.mdp);
    const RunRecord run = run_single(cfg, mdp, 0);
    REQUIRE(run.episodes.size() == 1);
    CHECK(run.final_regret() >= -1e-9);
}

TEST_CASE("oracle agent has zero regret") {
    const auto cfg = chain_config("oracle", 200);
    const RunRecord run = run_single(cfg, build_mdp(cfg.mdp), 3);
    CHECK(std::abs(run.final_regret()) < 1e-9);
    const RegretFit fit = fit_regret_exponent(run.cumulative_regret());
    CHECK(fit.b == 0.0);
}

TEST_CASE("random agent regret grows linearly") {
    double prev = -1.0;
    for (int K : {500, 1000, 2000}) {
        auto cfg = chain_config("random", K);
        cfg.seeds = {0};
        const auto summary = run_experiment(cfg);
        const double rate = summary.mean_final_regret() / K;
        CHECK(rate > 0.0);
        if (prev > 0.0) CHECK(rate == doctest::Approx(prev).epsilon(0.05));
        prev = rate;
    }
}

TEST_CASE("regret exponent fit") {
    std::vector<double> sq, lin, zero(300, 0.0);
    for (int k = 1; k <= 1000; ++k) {
        sq.push_back(2.0 * std::sqrt(static_cast<double>(k)));
        lin.push_back(0.1 * k);
    }
    const RegretFit a = fit_regret_exponent(sq);
    CHECK(a.b == doctest::Approx(0.5).epsilon(0.02));
    CHECK(a.a == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(a.r2 > 0.999);
    CHECK(fit_regret_exponent(lin).b == doctest::Approx(1.0).epsilon(1e-9));
    const RegretFit z = fit_regret_exponent(zero);
    CHECK(z.b == 0.0);
    CHECK(z.r2 == 1.0);
    CHECK_THROWS_AS(fit_regret_exponent(std::vector<double>(99, 1.0)), TooFewEpisodes);
}

TEST_CASE("compute_regret of the optimal policy is zero") {
    const EpisodicMdp mdp = random_mdp(3, 2, 3, 1);
    const auto [values, pi] = optimal_values(mdp);
    const std::vector<Policy> policies(5, pi);
    const std::vector<int> starts{0, 1, 2, 0, 1};
    const auto pts = compute_regret(mdp, policies, starts);
    REQUIRE(pts.size() == 5);
    for (const auto& p : pts) {
        CHECK(p.v_star == doctest::Approx(p.v_pik));
        CHECK(std::abs(p.cum_regret) < 1e-12);
    }
}

TEST_CASE("csv output") {
    SUBCASE("header only") {
        const fs::path dir = scratch("header");
        fs::create_directories(dir);
        RunRecord empty;
        emit_csv(empty, (dir / "run.csv").string());
        CHECK(slurp(dir / "run.csv") == std::string(kCsvHeader) + "\n");
        CHECK(read_csv((dir / "run.csv").string()).empty());
    }
    SUBCASE("round trip and conservation") {
        const auto cfg = chain_config("sf_lsvi", 150);
        const RunRecord run = run_single(cfg, build_mdp(cfg.mdp), 1);
        const fs::path dir = scratch("roundtrip");
        fs::create_directories(dir);
        emit_csv(run, (dir / "run.csv").string());
        const auto back = read_csv((dir / "run.csv").string());
        REQUIRE(back.size() == run.episodes.size());
        double cum = 0.0;
        for (std::size_t i = 0; i < back.size(); ++i) {
            const auto& a = run.episodes[i];
            const auto& b = back[i];
            CHECK(b.episode == a.episode);
            CHECK(b.realized_return == a.realized_return);
            CHECK(b.v_star == a.v_star);
            CHECK(b.v_pik == a.v_pik);
            CHECK(b.cum_regret == a.cum_regret);
            CHECK(b.bonus_mass == a.bonus_mass);
            CHECK(b.optimism_violations == a.optimism_violations);
            CHECK(a.inst_regret >= -1e-9);
            cum += a.inst_regret;
            CHECK(a.cum_regret == doctest::Approx(cum).epsilon(1e-12));
        }
    }
}

TEST_CASE("runs are deterministic") {
    auto cfg = chain_config("sf_lsvi", 120);
    cfg.seeds = {0, 1, 2};
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    cfg.out_dir = a.string();
    run_experiment(cfg);
    cfg.out_dir = b.string();
    cfg.parallel = false;
    run_experiment(cfg);
    for (int seed = 0; seed < 3; ++seed) {
        const std::string name = "run_" + std::to_string(seed) + ".csv";
        CHECK(slurp(a / name) == slurp(b / name));
    }
    const auto sa = nlohmann::json::parse(slurp(a / "summary.json"));
    const auto sb = nlohmann::json::parse(slurp(b / "summary.json"));
    CHECK(sa["runs"] == sb["runs"]);
    CHECK(sa["mean_final_regret"] == sb["mean_final_regret"]);
}

TEST_CASE("learners pass the runtime audits") {
    for (const std::string agent : {"sf_lsvi", "lsvi_ucb"}) {
        CAPTURE(agent);
        const auto cfg = chain_config(agent, 300);
        const RunRecord run = run_single(cfg, build_mdp(cfg.mdp), 0);
        CHECK(run.decomposition_pass_rate() == 1.0);
        CHECK(run.optimism_violation_rate() <= 0.05);
        CHECK(run.visited_steps == 300 * 4);
    }
}

TEST_CASE("summary json fields") {
    const auto summary = run_experiment(chain_config("sf_lsvi", 100));
    const auto j = summary.to_json();
    for (const char* key : {"git_describe", "master_seed", "config", "runs", "mean_final_regret", "se_final_regret",
                            "optimism_violation_rate", "fit"})
        CHECK(j.contains(key));
    CHECK(j["runs"].size() == 2);
    // config survives a round trip
    const ExperimentConfig back = experiment_config_from_json(j["config"]);
    CHECK(back.K == 100);
    CHECK(back.agent == "sf_lsvi");
}

TEST_CASE("config validation") {
    auto cfg = chain_config("greedy", 10);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = chain_config("sf_lsvi", 0);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"agent", 3}}), ConfigError);
}
