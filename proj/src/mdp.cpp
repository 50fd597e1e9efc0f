#include "sketchrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sketchrl/errors.hpp"

namespace sketchrl {

namespace {

constexpr double kSimplexTol = 1e-12;

std::string where(int h, int s, int a) {
    return "(h=" + std::to_string(h) + ", s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

bool is_simplex(std::span<const double> p) {
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= kSimplexTol;
}

}  // namespace

EpisodicMdp validate_mdp(RawMdp raw) {
    if (raw.S <= 0 || raw.A <= 0 || raw.H <= 0)
        throw BadDimensions("S, A and H must be positive");
    const auto S = static_cast<std::size_t>(raw.S);
    const auto A = static_cast<std::size_t>(raw.A);
    const auto H = static_cast<std::size_t>(raw.H);
    if (raw.P.size() != H * S * A * S)
        throw BadDimensions("P has " + std::to_string(raw.P.size()) + " entries, expected " +
                            std::to_string(H * S * A * S));
    if (raw.r.size() != H * S * A)
        throw BadDimensions("r has " + std::to_string(raw.r.size()) + " entries, expected " +
                            std::to_string(H * S * A));
    if (raw.s_init.empty()) {
        raw.s_init.assign(S, 0.0);
        raw.s_init[0] = 1.0;
    }
    if (raw.s_init.size() != S) throw BadDimensions("s_init must have S entries");

    for (int h = 0; h < raw.H; ++h)
        for (int s = 0; s < raw.S; ++s)
            for (int a = 0; a < raw.A; ++a) {
                const std::size_t row = (static_cast<std::size_t>(h) * S + s) * A + a;
                std::span<const double> p(raw.P.data() + row * S, S);
                if (!is_simplex(p)) throw InvalidStochasticRow("transition row " + where(h, s, a));
                const double rew = raw.r[row];
                if (!(rew >= 0.0 && rew <= 1.0))
                    throw RewardOutOfRange("reward " + std::to_string(rew) + " at " + where(h, s, a));
            }
    if (!is_simplex(raw.s_init)) throw InvalidStochasticRow("initial-state distribution");

    EpisodicMdp mdp;
    mdp.S_ = raw.S;
    mdp.A_ = raw.A;
    mdp.H_ = raw.H;
    mdp.P_ = raw.P;
    mdp.r_ = raw.r;
    mdp.s_init_ = raw.s_init;
    mdp.raw_ = std::move(raw);
    return mdp;
}

void EpisodicMdp::check_indices(int h, int s, int a) const {
    if (h < 0 || h >= H_ || s < 0 || s >= S_ || a < 0 || a >= A_)
        throw IndexOutOfRange(where(h, s, a));
}

std::span<const double> EpisodicMdp::transition(int h, int s, int a) const {
    check_indices(h, s, a);
    return {P_.data() + row(h, s, a) * S_, static_cast<std::size_t>(S_)};
}

double EpisodicMdp::reward(int h, int s, int a) const {
    check_indices(h, s, a);
    return r_[row(h, s, a)];
}

// ---- Policy / ValueTables ---------------------------------------------------

Policy::Policy(int H, int S, std::vector<int> actions) : H_(H), S_(S), table_(std::move(actions)) {
    if (H <= 0 || S <= 0 || table_.size() != static_cast<std::size_t>(H) * S)
        throw BadDimensions("policy table must be H x S");
}

Policy Policy::constant(int H, int S, int action) {
    return Policy(H, S, std::vector<int>(static_cast<std::size_t>(H) * S, action));
}

void Policy::check_against(const EpisodicMdp& mdp) const {
    if (H_ != mdp.horizon() || S_ != mdp.num_states())
        throw BadDimensions("policy shape does not match MDP");
    for (int a : table_)
        if (a < 0 || a >= mdp.num_actions())
            throw IndexOutOfRange("policy action " + std::to_string(a));
}

ValueTables::ValueTables(int H, int S, int A)
    : H_(H), S_(S), A_(A),
      Q_(static_cast<std::size_t>(H) * S * A, 0.0),
      V_(static_cast<std::size_t>(H + 1) * S, 0.0) {}

double ValueTables::expected_next(const EpisodicMdp& mdp, int h, int s, int a) const {
    const auto p = mdp.transition(h, s, a);
    double acc = 0.0;
    for (int sp = 0; sp < S_; ++sp)
        if (p[sp] > 0.0) acc += p[sp] * v(h + 1, sp);
    return acc;
}

int greedy_action(std::span<const double> q_row) {
    int best = 0;
    for (std::size_t a = 1; a < q_row.size(); ++a)
        if (q_row[a] > q_row[best]) best = static_cast<int>(a);
    return best;
}

int sample_transition(const EpisodicMdp& mdp, int h, int s, int a, Rng& rng) {
    mdp.check_indices(h, s, a);
    return static_cast<int>(sample_index(mdp.transition(h, s, a), rng));
}

int sample_initial_state(const EpisodicMdp& mdp, Rng& rng) {
    return static_cast<int>(sample_index(mdp.initial_distribution(), rng));
}

std::pair<ValueTables, Policy> optimal_values(const EpisodicMdp& mdp) {
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    ValueTables vt(H, S, A);
    Policy pi = Policy::constant(H, S);
    std::vector<double> row(A);
    for (int h = H - 1; h >= 0; --h)
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                vt.q(h, s, a) = mdp.reward(h, s, a) + vt.expected_next(mdp, h, s, a);
                row[a] = vt.q(h, s, a);
            }
            const int best = greedy_action(row);
            pi.set(h, s, best);
            vt.v(h, s) = row[best];
        }
    return {std::move(vt), std::move(pi)};
}

ValueTables evaluate_policy(const EpisodicMdp& mdp, const Policy& pi) {
    pi.check_against(mdp);
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    ValueTables vt(H, S, A);
    for (int h = H - 1; h >= 0; --h)
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a)
                vt.q(h, s, a) = mdp.reward(h, s, a) + vt.expected_next(mdp, h, s, a);
            vt.v(h, s) = vt.q(h, s, pi.action(h, s));
        }
    return vt;
}

double initial_value(const EpisodicMdp& mdp, const ValueTables& values) {
    const auto init = mdp.initial_distribution();
    double acc = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) acc += init[s] * values.v(0, s);
    return acc;
}

// ---- constructors -------------------------------------------------------------

namespace {

struct Builder {
    RawMdp raw;
    Builder(int S, int A, int H) {
        raw.S = S;
        raw.A = A;
        raw.H = H;
        raw.P.assign(static_cast<std::size_t>(H) * S * A * S, 0.0);
        raw.r.assign(static_cast<std::size_t>(H) * S * A, 0.0);
        raw.s_init.assign(S, 0.0);
        raw.s_init[0] = 1.0;
    }
    std::size_t row(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * raw.S + s) * raw.A + a;
    }
    double& p(int h, int s, int a, int sp) { return raw.P[row(h, s, a) * raw.S + sp]; }
    double& r(int h, int s, int a) { return raw.r[row(h, s, a)]; }
    // states with no outgoing mass stay put
    void fill_self_loops() {
        for (int h = 0; h < raw.H; ++h)
            for (int s = 0; s < raw.S; ++s)
                for (int a = 0; a < raw.A; ++a) {
                    double sum = 0.0;
                    for (int sp = 0; sp < raw.S; ++sp) sum += p(h, s, a, sp);
                    if (sum == 0.0) p(h, s, a, s) = 1.0;
                }
    }
};

}  // namespace

EpisodicMdp chain_mdp(int S, int H, double slip_prob, double distractor) {
    if (S < 2 || H < 1) throw BadParams("chain needs S >= 2 and H >= 1");
    if (!(slip_prob >= 0.0 && slip_prob < 1.0)) throw BadParams("slip_prob must be in [0, 1)");
    Builder b(S, 2, H);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s) {
            b.p(h, s, 0, std::max(s - 1, 0)) = 1.0;
            const int right = std::min(s + 1, S - 1);
            b.p(h, s, 1, right) += 1.0 - slip_prob;
            b.p(h, s, 1, s) += slip_prob;
            if (s == S - 1) {
                b.r(h, s, 0) = 1.0;
                b.r(h, s, 1) = 1.0;
            }
        }
    for (int h = 0; h < H; ++h) b.r(h, 0, 0) = distractor;
    return validate_mdp(std::move(b.raw));
}

EpisodicMdp random_mdp(int S, int A, int H, std::uint64_t seed, double reward_sparsity) {
    if (S < 1 || A < 1 || H < 1) throw BadParams("random_mdp needs positive sizes");
    Rng rng = make_stream(seed, {0x6d6470});
    Builder b(S, A, H);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                std::vector<double> w(S);
                for (auto& x : w) x = -std::log(1.0 - uniform01(rng));  // Dirichlet(1)
                const double total = std::accumulate(w.begin(), w.end(), 0.0);
                // last entry absorbs rounding so the row sums to one exactly
                double acc = 0.0;
                for (int sp = 0; sp + 1 < S; ++sp) {
                    b.p(h, s, a, sp) = w[sp] / total;
                    acc += b.p(h, s, a, sp);
                }
                b.p(h, s, a, S - 1) = std::max(0.0, 1.0 - acc);
                const double u = uniform01(rng);
                const double rew = uniform01(rng);
                b.r(h, s, a) = u < reward_sparsity ? 0.0 : rew;
            }
    return validate_mdp(std::move(b.raw));
}

EpisodicMdp gridworld(int width, int height, int H) {
    if (width < 1 || height < 1 || H < 1) throw BadParams("gridworld needs positive sizes");
    const int S = width * height;
    Builder b(S, 4, H);
    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {1, -1, 0, 0};
    for (int h = 0; h < H; ++h)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const int s = y * width + x;
                for (int a = 0; a < 4; ++a) {
                    const int nx = std::clamp(x + dx[a], 0, width - 1);
                    const int ny = std::clamp(y + dy[a], 0, height - 1);
                    b.p(h, s, a, ny * width + nx) = 1.0;
                    if (s == S - 1) b.r(h, s, a) = 1.0;
                }
            }
    return validate_mdp(std::move(b.raw));
}

double quantile_witness_pz0(const CounterexampleParams& params) {
    const auto& py = params.y_weights;
    double cum = 0.0;
    for (int i = 0; i <= params.target_index && i < static_cast<int>(py.size()); ++i) cum += py[i];
    return 2.0 * params.alpha - cum + params.margin;
}

namespace {

EpisodicMdp two_stage(const std::vector<double>& rewards, const std::vector<double>& weights) {
    if (rewards.empty() || rewards.size() != weights.size())
        throw BadParams("terminal rewards and weights must be nonempty and equal length");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw BadParams("negative terminal weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) throw BadParams("terminal weights must sum to 1");
    const int M = static_cast<int>(rewards.size());
    Builder b(1 + M, 1, 2);
    for (int i = 0; i < M; ++i) {
        b.p(0, 0, 0, 1 + i) = weights[i];
        b.r(1, 1 + i, 0) = rewards[i];
    }
    b.fill_self_loops();
    try {
        return validate_mdp(std::move(b.raw));
    } catch (const RewardOutOfRange& e) {
        throw BadParams(e.what());
    }
}

}  // namespace

EpisodicMdp make_counterexample_mdp(CounterexampleKind kind, const CounterexampleParams& params) {
    switch (kind) {
        case CounterexampleKind::two_stage_general:
            return two_stage(params.terminal_rewards, params.terminal_weights);

        case CounterexampleKind::quantile_witness: {
            const double alpha = params.alpha;
            const auto& y = params.y_atoms;
            const auto& py = params.y_weights;
            const int N = static_cast<int>(y.size());
            if (!(alpha > 0.0 && alpha < 1.0)) throw BadParams("alpha must be in (0, 1)");
            if (N < 1 || static_cast<int>(py.size()) != N + 1)
                throw BadParams("need N >= 1 atoms and N + 1 weights");
            for (int i = 0; i < N; ++i)
                if (!(y[i] > 0.0 && y[i] < 1.0) || (i > 0 && !(y[i] > y[i - 1])))
                    throw BadParams("y atoms must be strictly increasing in (0, 1)");
            double sum = 0.0;
            for (double w : py) {
                if (w < 0.0) throw BadParams("negative weight");
                sum += w;
            }
            if (std::abs(sum - 1.0) > kSimplexTol) throw BadParams("Y weights must sum to 1");
            if (!(py[0] > alpha)) throw BadParams("p_{y_0} must exceed alpha");
            const int n = params.target_index;
            if (n < 1 || n > N) throw BadParams("target_index out of range");
            if (!(params.margin > 0.0 && params.margin < py[n]))
                throw BadParams("margin must lie in (0, p_{y_n})");
            const double pz0 = quantile_witness_pz0(params);
            if (!(pz0 >= 0.0 && pz0 < alpha)) throw BadParams("p_{z_0} falls outside [0, alpha)");

            std::vector<double> rewards{0.0};
            std::vector<double> weights{0.5 * py[0] + 0.5 * pz0};
            for (int i = 0; i < N; ++i) {
                rewards.push_back(y[i]);
                weights.push_back(0.5 * py[i + 1]);
            }
            rewards.push_back(1.0);
            weights.push_back(0.5 * (1.0 - pz0));
            // renormalize the last entry against rounding
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < weights.size(); ++i) acc += weights[i];
            weights.back() = 1.0 - acc;
            return two_stage(rewards, weights);
        }

        case CounterexampleKind::max_min_demo: {
            const double g = params.gamma;
            const int K = params.K;
            const int n = params.grid_points;
            if (K < 1 || n < 2 || !(g > 0.0) || g + g / K > 1.0)
                throw BadParams("max_min_demo needs K >= 1, grid_points >= 2, 0 < γ(1 + 1/K) <= 1");
            Builder b(3 + 2 * n, 1, 3);
            b.p(0, 0, 0, 1) = 0.5;
            b.p(0, 0, 0, 2) = 0.5;
            for (int j = 0; j < n; ++j) {
                const double u = g * j / (n - 1);
                b.p(1, 1, 0, 3 + j) = 1.0 / n;
                b.p(1, 2, 0, 3 + n + j) = 1.0 / n;
                b.r(2, 3 + j, 0) = u;
                b.r(2, 3 + n + j, 0) = g / K + u;
            }
            // exact simplex rows: put the rounding residue on the last leaf
            for (int s : {1, 2}) {
                double acc = 0.0;
                for (int j = 0; j + 1 < n; ++j) acc += b.p(1, s, 0, 3 + (s - 1) * n + j);
                b.p(1, s, 0, 3 + (s - 1) * n + n - 1) = 1.0 - acc;
            }
            b.fill_self_loops();
            return validate_mdp(std::move(b.raw));
        }
    }
    throw BadParams("unknown counterexample kind");
}

}  // namespace sketchrl
