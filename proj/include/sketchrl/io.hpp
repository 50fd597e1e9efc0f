#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sketchrl/agent.hpp"
#include "sketchrl/approx.hpp"
#include "sketchrl/distribution.hpp"
#include "sketchrl/harness.hpp"
#include "sketchrl/mdp.hpp"
#include "sketchrl/sketch.hpp"

namespace sketchrl {

// Malformed or missing fields raise ConfigError; model validation errors
// (InvalidStochasticRow, ...) pass through unchanged.

nlohmann::json read_json_file(const std::string& path);

/// {"S","A","H","P":[H][S][A][S],"r":[H][S][A],"s_init":[S] (optional)}
EpisodicMdp mdp_from_json(const nlohmann::json& j);
nlohmann::json mdp_to_json(const EpisodicMdp& mdp);

/// {"pi": [[a for s] for h]}
Policy policy_from_json(const nlohmann::json& j);
nlohmann::json policy_to_json(const Policy& pi);

/// {"kind":"moments","N":3} plus kind-specific fields.
SketchSpec sketch_spec_from_json(const nlohmann::json& j);
nlohmann::json sketch_spec_to_json(const SketchSpec& spec);

nlohmann::json distribution_to_json(const CategoricalDistribution& d);

/// {"tables": [ [H][S][A][N], ... ]}, or a bare list of tables.
EnumeratedFunctionClass enumerated_class_from_json(const nlohmann::json& j);
nlohmann::json enumerated_class_to_json(const EnumeratedFunctionClass& cls);

/// {"N":2,"lambda":1.0,"c_scale":0.5,"delta":0.05,"class":{"kind":"tabular_onehot"}}
PlanningConfig planning_config_from_json(const nlohmann::json& j);
nlohmann::json planning_config_to_json(const PlanningConfig& cfg);

/// {"mdp":{"builtin":"chain","params":{...}} | {"path":...}, "agent":..., "agent_config":{...},
///  "K":..., "seeds":[...], "master_seed":..., "out_dir":..., "optimism_audit":..., "bonus_mass":...}
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

/// Replaces master_seed with SKETCHRL_SEED when that variable is set.
void apply_env_overrides(ExperimentConfig& cfg);

nlohmann::json replay_to_json(const std::vector<Transition>& replay);
std::vector<Transition> replay_from_json(const nlohmann::json& j);

}  // namespace sketchrl
