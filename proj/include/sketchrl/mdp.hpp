#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sketchrl/rng.hpp"

namespace sketchrl {

// Steps are 0-based throughout the library: h = 0 is the first decision
// and h = H - 1 the last. Value tables carry an extra terminal row at
// h = H which is identically zero.

/// Unvalidated MDP description, as read from a file or built by hand.
struct RawMdp {
    int S = 0;
    int A = 0;
    int H = 0;
    std::vector<double> P;       // [H][S][A][S]
    std::vector<double> r;       // [H][S][A]
    std::vector<double> s_init;  // [S]
};

/// Finite episodic MDP with deterministic rewards in [0, 1].
/// Only obtainable through validate_mdp, so every instance is valid.
class EpisodicMdp {
public:
    int num_states() const { return S_; }
    int num_actions() const { return A_; }
    int horizon() const { return H_; }

    std::span<const double> transition(int h, int s, int a) const;
    double reward(int h, int s, int a) const;
    std::span<const double> initial_distribution() const { return s_init_; }

    void check_indices(int h, int s, int a) const;
    const RawMdp& raw() const { return raw_; }

private:
    friend EpisodicMdp validate_mdp(RawMdp raw);
    EpisodicMdp() = default;

    std::size_t row(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * S_ + s) * A_ + a;
    }

    int S_ = 0, A_ = 0, H_ = 0;
    std::vector<double> P_, r_, s_init_;
    RawMdp raw_;
};

/// Returns a valid MDP or throws BadDimensions, InvalidStochasticRow or
/// RewardOutOfRange. Rows must sum to one within 1e-12.
EpisodicMdp validate_mdp(RawMdp raw);

/// Deterministic Markov policy, action table [h][s].
class Policy {
public:
    Policy(int H, int S, std::vector<int> actions);
    static Policy constant(int H, int S, int action = 0);

    int action(int h, int s) const { return table_[static_cast<std::size_t>(h) * S_ + s]; }
    void set(int h, int s, int a) { table_[static_cast<std::size_t>(h) * S_ + s] = a; }
    int horizon() const { return H_; }
    int num_states() const { return S_; }
    const std::vector<int>& table() const { return table_; }

    /// Throws BadDimensions / IndexOutOfRange if incompatible with `mdp`.
    void check_against(const EpisodicMdp& mdp) const;

    bool operator==(const Policy&) const = default;

private:
    int H_, S_;
    std::vector<int> table_;
};

/// Q[h][s][a] for h < H and V[h][s] for h <= H (V[H] = 0).
class ValueTables {
public:
    ValueTables(int H, int S, int A);

    double q(int h, int s, int a) const { return Q_[(static_cast<std::size_t>(h) * S_ + s) * A_ + a]; }
    double& q(int h, int s, int a) { return Q_[(static_cast<std::size_t>(h) * S_ + s) * A_ + a]; }
    double v(int h, int s) const { return V_[static_cast<std::size_t>(h) * S_ + s]; }
    double& v(int h, int s) { return V_[static_cast<std::size_t>(h) * S_ + s]; }

    int horizon() const { return H_; }
    int num_states() const { return S_; }
    int num_actions() const { return A_; }

    /// Expected V at step h+1 under P_h(.|s,a).
    double expected_next(const EpisodicMdp& mdp, int h, int s, int a) const;

private:
    int H_, S_, A_;
    std::vector<double> Q_, V_;
};

/// Lowest-index argmax over a row of Q values.
int greedy_action(std::span<const double> q_row);

/// Draws s' ~ P_h(.|s, a).
int sample_transition(const EpisodicMdp& mdp, int h, int s, int a, Rng& rng);

/// Draws s_1 from the initial-state distribution.
int sample_initial_state(const EpisodicMdp& mdp, Rng& rng);

/// Backward induction for Q*, V* and a greedy optimal policy.
std::pair<ValueTables, Policy> optimal_values(const EpisodicMdp& mdp);

/// Exact Q^pi, V^pi by backward recursion.
ValueTables evaluate_policy(const EpisodicMdp& mdp, const Policy& pi);

/// E_{s1 ~ s_init} V_0(s1).
double initial_value(const EpisodicMdp& mdp, const ValueTables& values);

// ---- environment constructors -------------------------------------------

/// Chain of S states with two actions. Action 1 moves right with
/// probability 1 - slip_prob (otherwise stays), action 0 moves left.
/// The rightmost state pays 1 for either action; the leftmost state pays
/// `distractor` for moving left. Stationary across steps; starts at 0.
EpisodicMdp chain_mdp(int S, int H, double slip_prob, double distractor = 0.05);

/// Dense random MDP. Each reward is zero with probability
/// `reward_sparsity`, otherwise uniform on [0, 1].
EpisodicMdp random_mdp(int S, int A, int H, std::uint64_t seed, double reward_sparsity = 0.0);

/// Deterministic grid with actions {up, down, left, right}. Start at the
/// bottom-left cell; the top-right cell pays 1.
EpisodicMdp gridworld(int width, int height, int H);

// ---- two-stage constructions used by the verifier ---------------------------

enum class CounterexampleKind { two_stage_general, quantile_witness, max_min_demo };

struct CounterexampleParams {
    // two_stage_general
    std::vector<double> terminal_rewards;
    std::vector<double> terminal_weights;
    // quantile_witness
    double alpha = 0.5;
    std::vector<double> y_atoms;    // 0 < y_1 < ... < y_N < 1
    std::vector<double> y_weights;  // p_{y_0}, ..., p_{y_N}
    int target_index = 1;           // n in [1, N]; mixture quantile lands on y_n
    double margin = 1e-3;           // added to p_{z_0} so the CDF crosses alpha strictly
    // max_min_demo
    double gamma = 0.5;
    int K = 4;
    int grid_points = 5;
};

/// Builds the counterexample MDPs of the closedness / consistency
/// arguments. All have a single action and start at state 0 with reward 0.
///
/// two_stage_general: H = 2, state 0 moves to terminal i with weight w_i and
/// the terminal pays reward_i.
///
/// quantile_witness: the mixture (Y + Z) / 2 with
/// Y = p_{y_0} δ_0 + Σ p_{y_i} δ_{y_i} and Z = p_{z_0} δ_0 + (1 - p_{z_0}) δ_1,
/// p_{z_0} = 2α - Σ_{i<=n} p_{y_i} + margin, flattened into an H = 2 MDP.
///
/// max_min_demo: H = 3; state 0 splits evenly into two states whose returns
/// are uniform grids on [0, γ] and [γ/K, γ + γ/K].
EpisodicMdp make_counterexample_mdp(CounterexampleKind kind, const CounterexampleParams& params);

/// p_{z_0} used by the quantile witness for the given parameters.
double quantile_witness_pz0(const CounterexampleParams& params);

}  // namespace sketchrl
