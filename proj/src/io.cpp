#include "sketchrl/io.hpp"

#include <cstdlib>
#include <fstream>

#include "sketchrl/errors.hpp"

namespace sketchrl {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return field<T>(j, key);
}

// Flattens a nested array of numbers, checking the shape level by level.
void flatten(const json& j, std::span<const int> shape, std::vector<double>& out, const std::string& what) {
    if (shape.empty()) {
        if (!j.is_number()) throw ConfigError(what + ": expected a number");
        out.push_back(j.get<double>());
        return;
    }
    if (!j.is_array() || j.size() != static_cast<std::size_t>(shape.front()))
        throw BadDimensions(what + ": expected an array of length " + std::to_string(shape.front()));
    for (const auto& e : j) flatten(e, shape.subspan(1), out, what);
}

json nest(std::span<const double> flat, std::span<const int> shape) {
    if (shape.empty()) return flat.front();
    json arr = json::array();
    std::size_t stride = 1;
    for (int s : shape.subspan(1)) stride *= static_cast<std::size_t>(s);
    for (int i = 0; i < shape.front(); ++i)
        arr.push_back(nest(flat.subspan(static_cast<std::size_t>(i) * stride, stride), shape.subspan(1)));
    return arr;
}

}  // namespace

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

EpisodicMdp mdp_from_json(const json& j) {
    RawMdp raw;
    raw.S = field<int>(j, "S");
    raw.A = field<int>(j, "A");
    raw.H = field<int>(j, "H");
    if (raw.S <= 0 || raw.A <= 0 || raw.H <= 0) throw BadDimensions("S, A and H must be positive");
    const int p_shape[] = {raw.H, raw.S, raw.A, raw.S};
    const int r_shape[] = {raw.H, raw.S, raw.A};
    if (!j.contains("P") || !j.contains("r")) throw ConfigError("mdp needs 'P' and 'r'");
    flatten(j.at("P"), p_shape, raw.P, "P");
    flatten(j.at("r"), r_shape, raw.r, "r");
    if (j.contains("s_init")) {
        const int s_shape[] = {raw.S};
        flatten(j.at("s_init"), s_shape, raw.s_init, "s_init");
    }
    return validate_mdp(std::move(raw));
}

json mdp_to_json(const EpisodicMdp& mdp) {
    const RawMdp& raw = mdp.raw();
    const int p_shape[] = {raw.H, raw.S, raw.A, raw.S};
    const int r_shape[] = {raw.H, raw.S, raw.A};
    json j;
    j["S"] = raw.S;
    j["A"] = raw.A;
    j["H"] = raw.H;
    j["P"] = nest(raw.P, p_shape);
    j["r"] = nest(raw.r, r_shape);
    j["s_init"] = std::vector<double>(mdp.initial_distribution().begin(), mdp.initial_distribution().end());
    return j;
}

Policy policy_from_json(const json& j) {
    const auto rows = field<std::vector<std::vector<int>>>(j, "pi");
    if (rows.empty() || rows.front().empty()) throw BadDimensions("policy table is empty");
    const std::size_t S = rows.front().size();
    std::vector<int> flat;
    for (const auto& row : rows) {
        if (row.size() != S) throw BadDimensions("policy rows differ in length");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return Policy(static_cast<int>(rows.size()), static_cast<int>(S), std::move(flat));
}

json policy_to_json(const Policy& pi) {
    json rows = json::array();
    for (int h = 0; h < pi.horizon(); ++h) {
        json row = json::array();
        for (int s = 0; s < pi.num_states(); ++s) row.push_back(pi.action(h, s));
        rows.push_back(row);
    }
    return {{"pi", rows}};
}

SketchSpec sketch_spec_from_json(const json& j) {
    SketchSpec spec;
    try {
        spec.kind = sketch_kind_from_string(field<std::string>(j, "kind"));
    } catch (const BadSpec& e) {
        throw ConfigError(e.what());
    }
    spec.N = field_or<int>(j, "N", spec.kind == SketchKind::mean_variance ? 2 : 1);
    spec.alpha = field_or<double>(j, "alpha", 0.5);
    spec.grid = field_or<std::vector<double>>(j, "grid", {});
    spec.lambda = field_or<double>(j, "lambda", 1.0);
    spec.H_bound = field_or<double>(j, "H_bound", 1.0);
    if (spec.kind == SketchKind::median) spec.alpha = 0.5;
    spec.validate();
    return spec;
}

json sketch_spec_to_json(const SketchSpec& spec) {
    json j{{"kind", to_string(spec.kind)}};
    switch (spec.kind) {
        case SketchKind::moments:
            j["N"] = spec.N;
            j["H_bound"] = spec.H_bound;
            break;
        case SketchKind::central_moments: j["N"] = spec.N; break;
        case SketchKind::quantile: j["alpha"] = spec.alpha; break;
        case SketchKind::categorical: j["grid"] = spec.grid; break;
        case SketchKind::exp_utility: j["lambda"] = spec.lambda; break;
        default: break;
    }
    return j;
}

json distribution_to_json(const CategoricalDistribution& d) {
    return {{"atoms", d.atoms()}, {"weights", d.weights()}};
}

EnumeratedFunctionClass enumerated_class_from_json(const json& j) {
    const json& tables = j.is_array() ? j : j.contains("tables") ? j.at("tables") : throw ConfigError("missing 'tables'");
    if (!tables.is_array() || tables.empty()) throw BadDimensions("enumerated class is empty");
    // Shape comes from the first table.
    const json& t0 = tables.front();
    EnumeratedFunctionClass cls;
    try {
        cls.H = static_cast<int>(t0.size());
        cls.S = static_cast<int>(t0.at(0).size());
        cls.A = static_cast<int>(t0.at(0).at(0).size());
        cls.N = static_cast<int>(t0.at(0).at(0).at(0).size());
    } catch (const json::exception& e) {
        throw BadDimensions(std::string("enumerated table shape: ") + e.what());
    }
    const int shape[] = {cls.H, cls.S, cls.A, cls.N};
    for (const auto& t : tables) {
        std::vector<double> flat;
        flatten(t, shape, flat, "enumerated table");
        cls.tables.push_back(std::move(flat));
    }
    cls.validate();
    return cls;
}

json enumerated_class_to_json(const EnumeratedFunctionClass& cls) {
    const int shape[] = {cls.H, cls.S, cls.A, cls.N};
    json tables = json::array();
    for (const auto& t : cls.tables) tables.push_back(nest(t, shape));
    return {{"tables", tables}};
}

PlanningConfig planning_config_from_json(const json& j) {
    PlanningConfig cfg;
    cfg.N = field_or<int>(j, "N", cfg.N);
    cfg.lambda = field_or<double>(j, "lambda", cfg.lambda);
    cfg.c_scale = field_or<double>(j, "c_scale", cfg.c_scale);
    cfg.delta = field_or<double>(j, "delta", cfg.delta);
    cfg.T = field_or<double>(j, "T", cfg.T);
    if (j.contains("log_cover")) cfg.log_cover = field<double>(j, "log_cover");
    cfg.per_step_dataset = field_or<bool>(j, "per_step_dataset", false);
    cfg.inflate_higher_moments = field_or<bool>(j, "inflate_higher_moments", false);
    if (j.contains("class")) {
        const json& c = j.at("class");
        auto& d = cfg.function_class;
        d.kind = field_or<std::string>(c, "kind", d.kind);
        d.per_step = field_or<bool>(c, "per_step", false);
        d.d = field_or<int>(c, "d", d.d);
        d.seed = field_or<std::uint64_t>(c, "seed", 0);
        if (c.contains("table")) {
            const auto raw = c.at("table");
            if (!raw.is_array()) throw ConfigError("class table must be an array");
            std::vector<double> flat;
            std::function<void(const json&)> walk = [&](const json& x) {
                if (x.is_array()) {
                    for (const auto& e : x) walk(e);
                } else if (x.is_number()) {
                    flat.push_back(x.get<double>());
                } else {
                    throw ConfigError("class table entries must be numbers");
                }
            };
            walk(raw);
            d.table = std::move(flat);
        }
        if (c.contains("path")) d.enumerated = enumerated_class_from_json(read_json_file(field<std::string>(c, "path")));
        if (c.contains("tables")) d.enumerated = enumerated_class_from_json(c);
    }
    try {
        PlanningConfig probe = cfg;
        if (!(probe.T > 0.0)) probe.T = 1.0;
        probe.validate();
    } catch (const BadParams& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

json planning_config_to_json(const PlanningConfig& cfg) {
    json c{{"kind", cfg.function_class.kind}};
    if (cfg.function_class.kind == "tabular_onehot") c["per_step"] = cfg.function_class.per_step;
    if (cfg.function_class.kind == "random_fourier") {
        c["d"] = cfg.function_class.d;
        c["seed"] = cfg.function_class.seed;
    }
    if (cfg.function_class.kind == "lookup") {
        c["d"] = cfg.function_class.d;
        c["table"] = cfg.function_class.table;
    }
    if (cfg.function_class.enumerated) c["tables"] = enumerated_class_to_json(*cfg.function_class.enumerated)["tables"];
    json j{{"N", cfg.N},
           {"lambda", cfg.lambda},
           {"c_scale", cfg.c_scale},
           {"delta", cfg.delta},
           {"per_step_dataset", cfg.per_step_dataset},
           {"inflate_higher_moments", cfg.inflate_higher_moments},
           {"class", c}};
    if (cfg.T > 0.0) j["T"] = cfg.T;
    if (cfg.log_cover) j["log_cover"] = *cfg.log_cover;
    return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be an object");
    ExperimentConfig cfg;
    if (j.contains("mdp")) {
        const json& m = j.at("mdp");
        cfg.mdp.path = field_or<std::string>(m, "path", "");
        cfg.mdp.builtin = field_or<std::string>(m, "builtin", cfg.mdp.builtin);
        if (m.contains("params")) cfg.mdp.params = m.at("params");
    }
    cfg.agent = field_or<std::string>(j, "agent", cfg.agent);
    if (j.contains("agent_config")) cfg.planning = planning_config_from_json(j.at("agent_config"));
    cfg.K = field_or<int>(j, "K", cfg.K);
    cfg.seeds = field_or<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
    cfg.master_seed = field_or<std::uint64_t>(j, "master_seed", cfg.master_seed);
    cfg.out_dir = field_or<std::string>(j, "out_dir", cfg.out_dir);
    cfg.optimism_audit = field_or<bool>(j, "optimism_audit", cfg.optimism_audit);
    cfg.bonus_mass = field_or<bool>(j, "bonus_mass", cfg.bonus_mass);
    cfg.parallel = field_or<bool>(j, "parallel", cfg.parallel);
    cfg.validate();
    return cfg;
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
    json m;
    if (!cfg.mdp.path.empty()) {
        m["path"] = cfg.mdp.path;
    } else {
        m["builtin"] = cfg.mdp.builtin;
        m["params"] = cfg.mdp.params;
    }
    return {{"mdp", m},
            {"agent", cfg.agent},
            {"agent_config", planning_config_to_json(cfg.planning)},
            {"K", cfg.K},
            {"seeds", cfg.seeds},
            {"master_seed", cfg.master_seed},
            {"optimism_audit", cfg.optimism_audit},
            {"bonus_mass", cfg.bonus_mass}};
}

void apply_env_overrides(ExperimentConfig& cfg) {
    const char* env = std::getenv("SKETCHRL_SEED");
    if (!env || !*env) return;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
        cfg.master_seed = v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("SKETCHRL_SEED is not an unsigned integer: ") + env);
    }
}

json replay_to_json(const std::vector<Transition>& replay) {
    json arr = json::array();
    for (const auto& t : replay) arr.push_back({t.episode, t.h, t.s, t.a, t.r, t.next});
    return arr;
}

std::vector<Transition> replay_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("replay must be an array");
    std::vector<Transition> out;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 6) throw ConfigError("replay rows have 6 entries");
        try {
            out.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<int>(), row[3].get<int>(),
                           row[4].get<double>(), row[5].get<int>()});
        } catch (const json::exception& e) {
            throw ConfigError(std::string("replay row: ") + e.what());
        }
    }
    return out;
}

}  // namespace sketchrl
