#pragma once

#include <cstdint>
#include <vector>

#include "sketchrl/distribution.hpp"
#include "sketchrl/mdp.hpp"

namespace sketchrl {

/// Exact return distributions of a fixed policy.
/// q(h, s, a) is the law of the return from (h, s, a); v(h, s) the law
/// under the policy's action, with v(H, s) = δ_0.
class ReturnDistributions {
public:
    ReturnDistributions(int H, int S, int A);

    const CategoricalDistribution& q(int h, int s, int a) const { return eta_[index(h, s, a)]; }
    const CategoricalDistribution& v(int h, int s) const {
        return eta_bar_[static_cast<std::size_t>(h) * S_ + s];
    }

    int horizon() const { return H_; }
    int num_states() const { return S_; }
    int num_actions() const { return A_; }

private:
    friend ReturnDistributions exact_return_distribution(const EpisodicMdp&, const Policy&);
    std::size_t index(int h, int s, int a) const { return (static_cast<std::size_t>(h) * S_ + s) * A_ + a; }

    int H_, S_, A_;
    std::vector<CategoricalDistribution> eta_;
    std::vector<CategoricalDistribution> eta_bar_;
};

/// Backward recursion on categorical distributions:
/// η_h(s,a) = (B_{r_h(s,a)})# Σ_{s'} P_h(s'|s,a) η̄_{h+1}(s').
ReturnDistributions exact_return_distribution(const EpisodicMdp& mdp, const Policy& pi);

/// Law of the return from the initial-state distribution.
CategoricalDistribution initial_return_distribution(const EpisodicMdp& mdp, const ReturnDistributions& dists);

inline constexpr std::uint64_t kMaxTrajectories = 1'000'000;

/// Number of positive-probability trajectories from (h, s, a) under pi.
std::uint64_t count_trajectories(const EpisodicMdp& mdp, const Policy& pi, int h, int s, int a);

/// Brute-force return law from the initial-state distribution, one
/// trajectory at a time. Throws InstanceTooLarge above `limit` paths.
CategoricalDistribution enumerate_trajectory_returns(const EpisodicMdp& mdp, const Policy& pi,
                                                     std::uint64_t limit = kMaxTrajectories);

/// Same, starting from the state-action pair (h, s, a).
CategoricalDistribution enumerate_trajectory_returns_from(const EpisodicMdp& mdp, const Policy& pi,
                                                          int h, int s, int a,
                                                          std::uint64_t limit = kMaxTrajectories);

}  // namespace sketchrl
