#include "sketchrl/return_distribution.hpp"

#include <string>

#include "sketchrl/errors.hpp"

namespace sketchrl {

ReturnDistributions::ReturnDistributions(int H, int S, int A)
    : H_(H), S_(S), A_(A),
      eta_(static_cast<std::size_t>(H) * S * A, CategoricalDistribution::dirac(0.0)),
      eta_bar_(static_cast<std::size_t>(H + 1) * S, CategoricalDistribution::dirac(0.0)) {}

ReturnDistributions exact_return_distribution(const EpisodicMdp& mdp, const Policy& pi) {
    pi.check_against(mdp);
    const int H = mdp.horizon(), S = mdp.num_states(), A = mdp.num_actions();
    ReturnDistributions out(H, S, A);
    std::vector<std::pair<double, CategoricalDistribution>> parts;
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                parts.clear();
                const auto p = mdp.transition(h, s, a);
                for (int sp = 0; sp < S; ++sp)
                    if (p[sp] > 0.0) parts.emplace_back(p[sp], out.v(h + 1, sp));
                out.eta_[out.index(h, s, a)] =
                    CategoricalDistribution::mixture(parts).shifted(mdp.reward(h, s, a));
            }
        for (int s = 0; s < S; ++s)
            out.eta_bar_[static_cast<std::size_t>(h) * S + s] = out.q(h, s, pi.action(h, s));
    }
    return out;
}

CategoricalDistribution initial_return_distribution(const EpisodicMdp& mdp,
                                                    const ReturnDistributions& dists) {
    std::vector<std::pair<double, CategoricalDistribution>> parts;
    const auto init = mdp.initial_distribution();
    for (int s = 0; s < mdp.num_states(); ++s)
        if (init[s] > 0.0) parts.emplace_back(init[s], dists.v(0, s));
    return CategoricalDistribution::mixture(parts);
}

namespace {

// Paths from (h, s) following pi, saturating at limit + 1.
std::uint64_t count_from_state(const EpisodicMdp& mdp, const Policy& pi, int h, int s,
                               std::uint64_t limit);

std::uint64_t count_from_pair(const EpisodicMdp& mdp, const Policy& pi, int h, int s, int a,
                              std::uint64_t limit) {
    if (h == mdp.horizon() - 1) return 1;
    const auto p = mdp.transition(h, s, a);
    std::uint64_t total = 0;
    for (int sp = 0; sp < mdp.num_states(); ++sp) {
        if (p[sp] <= 0.0) continue;
        total += count_from_state(mdp, pi, h + 1, sp, limit);
        if (total > limit) return limit + 1;
    }
    return total;
}

std::uint64_t count_from_state(const EpisodicMdp& mdp, const Policy& pi, int h, int s,
                               std::uint64_t limit) {
    return count_from_pair(mdp, pi, h, s, pi.action(h, s), limit);
}

struct Enumerator {
    const EpisodicMdp& mdp;
    const Policy& pi;
    std::vector<double> rewards;  // rewards along the current path
    std::vector<double> atoms;
    std::vector<double> weights;

    void walk(int h, int s, int a, double prob) {
        rewards.push_back(mdp.reward(h, s, a));
        if (h == mdp.horizon() - 1) {
            // fold from the last step so the sum matches the backward recursion bit for bit
            double ret = 0.0;
            for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) ret = *it + ret;
            atoms.push_back(ret);
            weights.push_back(prob);
        } else {
            const auto p = mdp.transition(h, s, a);
            for (int sp = 0; sp < mdp.num_states(); ++sp)
                if (p[sp] > 0.0) walk(h + 1, sp, pi.action(h + 1, sp), prob * p[sp]);
        }
        rewards.pop_back();
    }
};

void guard(std::uint64_t count, std::uint64_t limit) {
    if (count > limit)
        throw InstanceTooLarge("more than " + std::to_string(limit) + " trajectories");
}

}  // namespace

std::uint64_t count_trajectories(const EpisodicMdp& mdp, const Policy& pi, int h, int s, int a) {
    pi.check_against(mdp);
    mdp.check_indices(h, s, a);
    return count_from_pair(mdp, pi, h, s, a, kMaxTrajectories * 1000);
}

CategoricalDistribution enumerate_trajectory_returns(const EpisodicMdp& mdp, const Policy& pi,
                                                     std::uint64_t limit) {
    pi.check_against(mdp);
    const auto init = mdp.initial_distribution();
    std::uint64_t count = 0;
    for (int s = 0; s < mdp.num_states(); ++s)
        if (init[s] > 0.0) count += count_from_state(mdp, pi, 0, s, limit);
    guard(count, limit);

    Enumerator e{mdp, pi, {}, {}, {}};
    for (int s = 0; s < mdp.num_states(); ++s)
        if (init[s] > 0.0) e.walk(0, s, pi.action(0, s), init[s]);
    return CategoricalDistribution(std::move(e.atoms), std::move(e.weights));
}

CategoricalDistribution enumerate_trajectory_returns_from(const EpisodicMdp& mdp, const Policy& pi,
                                                          int h, int s, int a, std::uint64_t limit) {
    pi.check_against(mdp);
    mdp.check_indices(h, s, a);
    guard(count_from_pair(mdp, pi, h, s, a, limit), limit);
    Enumerator e{mdp, pi, {}, {}, {}};
    e.walk(h, s, a, 1.0);
    return CategoricalDistribution(std::move(e.atoms), std::move(e.weights));
}

}  // namespace sketchrl
