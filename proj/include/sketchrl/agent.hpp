#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sketchrl/approx.hpp"
#include "sketchrl/mdp.hpp"

namespace sketchrl {

/// Which function class the agent regresses with.
struct ClassDescriptor {
    std::string kind = "tabular_onehot";  // tabular_onehot | random_fourier | lookup | enumerated
    bool per_step = false;                // tabular_onehot: separate features per step
    int d = 8;                            // random_fourier / lookup dimension
    std::uint64_t seed = 0;               // random_fourier
    std::vector<double> table;            // lookup, [H][S][A][d]
    std::optional<EnumeratedFunctionClass> enumerated;
};

struct PlanningConfig {
    int N = 2;
    double lambda = 1.0;
    double c_scale = 0.003;
    double delta = 0.05;
    ClassDescriptor function_class;
    /// T in log(T/δ); the harness sets K * H.
    double T = 0.0;
    /// Overrides the default covering term.
    std::optional<double> log_cover;
    /// Regress step h on rows from step h only instead of all steps.
    bool per_step_dataset = false;
    /// Add the first-output bonus to every stored higher-moment output.
    bool inflate_higher_moments = false;

    /// Throws BadParams.
    void validate() const;
};

FunctionClass build_function_class(const ClassDescriptor& desc, int H, int S, int A, int N);

struct Transition {
    int episode = 0;
    int h = 0, s = 0, a = 0;
    double r = 0.0;
    int next = 0;
    bool operator==(const Transition&) const = default;
};

/// Replay plus the incremental caches the planner reads.
class AgentState {
public:
    AgentState(int H, int S, int A, const PlanningConfig& cfg);

    /// Appends to the replay and updates the caches. Throws RewardOutOfRange
    /// and IndexOutOfRange.
    void record_transition(int episode, int h, int s, int a, double r, int next);

    int horizon() const { return H_; }
    int num_states() const { return S_; }
    int num_actions() const { return A_; }
    int N() const { return N_; }
    const FunctionClass& function_class() const { return cls_; }
    const std::vector<Transition>& replay() const { return replay_; }

    /// Σ φφᵀ over all rows (step < 0) or rows of one step, without the ridge term.
    const Eigen::MatrixXd& gram(int step = -1) const;
    /// Same quantity recomputed from the replay.
    Eigen::MatrixXd batch_gram(int step = -1) const;

    /// Σ r^p over rows with feature key `key` and successor `next`, p = 0..N.
    double reward_power_sum(std::size_t key, int next, int p) const {
        return acc_[(key * static_cast<std::size_t>(S_) + static_cast<std::size_t>(next)) *
                        static_cast<std::size_t>(N_ + 1) + static_cast<std::size_t>(p)];
    }
    std::size_t num_keys() const { return keys_; }
    std::size_t key(int h, int s, int a) const { return (static_cast<std::size_t>(h) * S_ + s) * A_ + a; }

private:
    int H_, S_, A_, N_;
    FunctionClass cls_;
    std::size_t keys_;
    std::vector<Transition> replay_;
    std::vector<double> acc_;
    Eigen::MatrixXd gram_all_;
    std::vector<Eigen::MatrixXd> gram_step_;
};

/// Everything one planning call produces for episode k.
struct PlanResult {
    Policy policy;
    ValueTables values;            // Q^k_h, V^k_h
    std::vector<double> q_sketch;  // ψ_{1:N}(η^k_h(s,a)), [H][S][A][N]
    std::vector<double> v_sketch;  // ψ_{1:N}(η̄^k_h(s)), [H+1][S][N]
    std::vector<double> bonus;     // b^k_h(s,a), [H][S][A]
    double beta = 0.0;
    int empty_region_warnings = 0;
    int N = 1;

    double psi_q(int h, int s, int a, int n) const;
    double psi_v(int h, int s, int n) const;
    double b(int h, int s, int a) const;
};

/// Backward moment-regression planning with a width bonus on the first output.
PlanResult sf_lsvi_plan(const AgentState& state, const PlanningConfig& cfg);

/// The N = 1 control arm. `state` must have been built with N = 1.
PlanResult lsvi_ucb_plan(const AgentState& state, const PlanningConfig& cfg);

/// Stored greedy action.
int act(const PlanResult& plan, int h, int s);

/// β for a given state and config, as used by the planner.
double planner_beta(const AgentState& state, const PlanningConfig& cfg);

}  // namespace sketchrl
