#include "sketchrl/agent.hpp"

#include <algorithm>
#include <cmath>

#include "sketchrl/errors.hpp"
#include "sketchrl/sketch.hpp"

namespace sketchrl {

void PlanningConfig::validate() const {
    if (N < 1) throw BadParams("N must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw BadParams("lambda must be finite and >= 0");
    if (!(c_scale >= 0.0) || !std::isfinite(c_scale)) throw BadParams("c_scale must be finite and >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw BadParams("delta must lie in (0, 1)");
    if (!(T > 0.0)) throw BadParams("T must be positive");
    if (log_cover && !(*log_cover >= 0.0)) throw BadParams("log_cover must be >= 0");
}

FunctionClass build_function_class(const ClassDescriptor& desc, int H, int S, int A, int N) {
    const double clip = static_cast<double>(H);
    if (desc.kind == "tabular_onehot")
        return LinearFunctionClass{FeatureMap::tabular_onehot(H, S, A, desc.per_step), N, clip};
    if (desc.kind == "random_fourier")
        return LinearFunctionClass{FeatureMap::random_fourier(H, S, A, desc.d, desc.seed), N, clip};
    if (desc.kind == "lookup")
        return LinearFunctionClass{FeatureMap::lookup(H, S, A, desc.d, desc.table), N, clip};
    if (desc.kind == "enumerated") {
        if (!desc.enumerated) throw BadParams("enumerated class descriptor carries no tables");
        const auto& e = *desc.enumerated;
        e.validate();
        if (e.H != H || e.S != S || e.A != A || e.N != N)
            throw BadDimensions("enumerated class shape does not match the MDP and N");
        return e;
    }
    throw BadParams("unknown function class '" + desc.kind + "'");
}

AgentState::AgentState(int H, int S, int A, const PlanningConfig& cfg)
    : H_(H), S_(S), A_(A), N_(cfg.N), cls_(build_function_class(cfg.function_class, H, S, A, cfg.N)),
      keys_(static_cast<std::size_t>(H) * S * A) {
    if (N_ < 1) throw BadParams("N must be >= 1");
    acc_.assign(keys_ * static_cast<std::size_t>(S_) * static_cast<std::size_t>(N_ + 1), 0.0);
    if (const auto* lin = std::get_if<LinearFunctionClass>(&cls_)) {
        const int d = lin->features.dimension();
        gram_all_ = Eigen::MatrixXd::Zero(d, d);
        gram_step_.assign(static_cast<std::size_t>(H), Eigen::MatrixXd::Zero(d, d));
    }
}

void AgentState::record_transition(int episode, int h, int s, int a, double r, int next) {
    if (!(r >= 0.0 && r <= 1.0)) throw RewardOutOfRange("reward " + std::to_string(r));
    if (h < 0 || h >= H_ || s < 0 || s >= S_ || a < 0 || a >= A_ || next < 0 || next >= S_)
        throw IndexOutOfRange("transition indices outside the agent's MDP shape");
    replay_.push_back({episode, h, s, a, r, next});
    const std::size_t k = key(h, s, a);
    double rp = 1.0;
    for (int p = 0; p <= N_; ++p) {
        acc_[(k * static_cast<std::size_t>(S_) + static_cast<std::size_t>(next)) * static_cast<std::size_t>(N_ + 1) +
             static_cast<std::size_t>(p)] += rp;
        rp *= r;
    }
    if (const auto* lin = std::get_if<LinearFunctionClass>(&cls_)) {
        const Eigen::VectorXd phi = lin->features(h, s, a);
        gram_all_.noalias() += phi * phi.transpose();
        gram_step_[static_cast<std::size_t>(h)].noalias() += phi * phi.transpose();
    }
}

const Eigen::MatrixXd& AgentState::gram(int step) const {
    if (!std::holds_alternative<LinearFunctionClass>(cls_)) throw BadParams("Gram matrix needs a linear class");
    if (step < 0) return gram_all_;
    if (step >= H_) throw IndexOutOfRange("step " + std::to_string(step));
    return gram_step_[static_cast<std::size_t>(step)];
}

Eigen::MatrixXd AgentState::batch_gram(int step) const {
    const auto* lin = std::get_if<LinearFunctionClass>(&cls_);
    if (!lin) throw BadParams("Gram matrix needs a linear class");
    const int d = lin->features.dimension();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    for (const auto& t : replay_) {
        if (step >= 0 && t.h != step) continue;
        const Eigen::VectorXd phi = lin->features(t.h, t.s, t.a);
        G += phi * phi.transpose();
    }
    return G;
}

double PlanResult::psi_q(int h, int s, int a, int n) const {
    const int S = values.num_states(), A = values.num_actions();
    return q_sketch[((static_cast<std::size_t>(h) * S + s) * A + a) * static_cast<std::size_t>(N) +
                    static_cast<std::size_t>(n)];
}

double PlanResult::psi_v(int h, int s, int n) const {
    const int S = values.num_states();
    return v_sketch[(static_cast<std::size_t>(h) * S + s) * static_cast<std::size_t>(N) + static_cast<std::size_t>(n)];
}

double PlanResult::b(int h, int s, int a) const {
    const int S = values.num_states(), A = values.num_actions();
    return bonus[(static_cast<std::size_t>(h) * S + s) * A + a];
}

double planner_beta(const AgentState& state, const PlanningConfig& cfg) {
    const double H = state.horizon();
    double log_cover = 0.0;
    if (cfg.log_cover) {
        log_cover = *cfg.log_cover;
    } else if (const auto* lin = std::get_if<LinearFunctionClass>(&state.function_class())) {
        log_cover = default_linear_log_cover(cfg.N, lin->features.dimension(), cfg.T, H, lin->features.bound());
    } else {
        log_cover = std::log(static_cast<double>(std::get<EnumeratedFunctionClass>(state.function_class()).size()));
    }
    return beta_threshold(cfg.N, H, cfg.T, cfg.delta, log_cover, cfg.c_scale);
}

PlanResult sf_lsvi_plan(const AgentState& state, const PlanningConfig& cfg) {
    cfg.validate();
    const int H = state.horizon(), S = state.num_states(), A = state.num_actions(), N = state.N();
    if (cfg.N != N) throw BadParams("config N does not match the agent state");
    const double Hd = static_cast<double>(H);
    const auto uN = static_cast<std::size_t>(N);
    const FunctionClass& cls = state.function_class();
    const auto* lin = std::get_if<LinearFunctionClass>(&cls);

    PlanResult out{Policy::constant(H, S, 0), ValueTables(H, S, A), {}, {}, {}, 0.0, 0, N};
    out.q_sketch.assign(static_cast<std::size_t>(H) * S * A * uN, 0.0);
    out.v_sketch.assign(static_cast<std::size_t>(H + 1) * S * uN, 0.0);  // ψ(η̄_{H}) = 0
    out.bonus.assign(static_cast<std::size_t>(H) * S * A, 0.0);
    out.beta = planner_beta(state, cfg);

    std::vector<double> norm(static_cast<std::size_t>(N) + 1);  // H^{n-1}
    for (int n = 1; n <= N; ++n) norm[static_cast<std::size_t>(n)] = std::pow(Hd, n - 1);

    std::vector<double> m(static_cast<std::size_t>(S) * (uN + 1));  // raw moments of η̄_{h+1}(s')
    std::vector<double> q_row(static_cast<std::size_t>(A));
    for (int h = H - 1; h >= 0; --h) {
        for (int sp = 0; sp < S; ++sp) {
            double* ms = &m[static_cast<std::size_t>(sp) * (uN + 1)];
            ms[0] = 1.0;
            for (int j = 1; j <= N; ++j)
                ms[j] = out.psi_v(h + 1, sp, j - 1) * norm[static_cast<std::size_t>(j)];
        }

        // (a) targets ψ_n((B_r)# η̄_{h+1}(s')) summed per key, from reward-power sums
        KeyedStats stats(state.num_keys(), N);
        for (int hp = 0; hp < H; ++hp) {
            if (cfg.per_step_dataset && hp != h) continue;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const std::size_t key = state.key(hp, s, a);
                    const auto ki = static_cast<Eigen::Index>(key);
                    for (int sp = 0; sp < S; ++sp) {
                        const double c = state.reward_power_sum(key, sp, 0);
                        if (c == 0.0) continue;
                        stats.count[ki] += c;
                        const double* ms = &m[static_cast<std::size_t>(sp) * (uN + 1)];
                        for (int n = 1; n <= N; ++n) {
                            double acc = 0.0;
                            for (int j = 0; j <= n; ++j)
                                acc += binomial(n, j) * ms[j] * state.reward_power_sum(key, sp, n - j);
                            stats.target_sum(ki, n - 1) += acc / norm[static_cast<std::size_t>(n)];
                        }
                    }
                }
        }

        // (b) regression
        FittedFunction fit;
        if (lin) {
            const int d = lin->features.dimension();
            const Eigen::MatrixXd gram = cfg.lambda * Eigen::MatrixXd::Identity(d, d) +
                                         state.gram(cfg.per_step_dataset ? h : -1);
            fit = fit_from_stats(stats, cls, cfg.lambda, &gram);
        } else {
            fit = fit_from_stats(stats, cls, cfg.lambda);
        }
        const ConfidenceRegion region{std::move(fit), out.beta};

        // (c)-(f) bonus, optimistic Q, greedy policy, sketch bookkeeping
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const Width w = width_first_component(region, cls, h, s, a);
                if (w.empty_region) ++out.empty_region_warnings;
                const std::size_t sa = (static_cast<std::size_t>(h) * S + s) * A + a;
                out.bonus[sa] = w.value;
                const double f1 = evaluate(region.center, cls, h, s, a, 0);
                const double q = std::clamp(f1 + w.value, 0.0, Hd);
                out.values.q(h, s, a) = q;
                out.q_sketch[sa * uN] = q;
                for (int n = 1; n < N; ++n) {
                    double f = evaluate(region.center, cls, h, s, a, n);
                    if (cfg.inflate_higher_moments) f += w.value;
                    out.q_sketch[sa * uN + static_cast<std::size_t>(n)] = std::clamp(f, -Hd, Hd);
                }
            }
            const std::size_t row = (static_cast<std::size_t>(h) * S + s) * A;
            for (int a = 0; a < A; ++a) q_row[static_cast<std::size_t>(a)] = out.values.q(h, s, a);
            const int best = greedy_action(q_row);
            out.policy.set(h, s, best);
            out.values.v(h, s) = out.values.q(h, s, best);
            for (int n = 0; n < N; ++n)
                out.v_sketch[(static_cast<std::size_t>(h) * S + s) * uN + static_cast<std::size_t>(n)] =
                    out.q_sketch[(row + static_cast<std::size_t>(best)) * uN + static_cast<std::size_t>(n)];
        }
    }
    return out;
}

PlanResult lsvi_ucb_plan(const AgentState& state, const PlanningConfig& cfg) {
    if (state.N() != 1) throw BadParams("the LSVI-UCB arm needs an N = 1 agent state");
    PlanningConfig one = cfg;
    one.N = 1;
    one.inflate_higher_moments = false;
    return sf_lsvi_plan(state, one);
}

int act(const PlanResult& plan, int h, int s) {
    if (h < 0 || h >= plan.policy.horizon() || s < 0 || s >= plan.policy.num_states())
        throw IndexOutOfRange("act(" + std::to_string(h) + ", " + std::to_string(s) + ")");
    return plan.policy.action(h, s);
}

}  // namespace sketchrl
