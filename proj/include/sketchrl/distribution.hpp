#pragma once

#include <span>
#include <utility>
#include <vector>

namespace sketchrl {

/// Atoms closer than this are merged into one.
inline constexpr double kAtomMergeTol = 1e-12;

/// Finite-support probability distribution over returns.
///
/// Atoms are strictly increasing, weights are nonnegative and sum to one
/// (within 1e-12). Atoms whose weight is exactly zero are dropped on
/// construction.
class CategoricalDistribution {
public:
    /// Builds from unsorted atoms; duplicate atoms (within kAtomMergeTol)
    /// are merged. Throws InvalidDistribution on negative weights, empty
    /// support, or total mass not within 1e-12 of one.
    CategoricalDistribution(std::vector<double> atoms, std::vector<double> weights);

    static CategoricalDistribution dirac(double x);

    /// Probability mixture Σ w_i · dist_i. Weights must form a simplex.
    static CategoricalDistribution mixture(
        std::span<const std::pair<double, CategoricalDistribution>> components);

    const std::vector<double>& atoms() const { return atoms_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return atoms_.size(); }

    /// Pushforward through x -> x + r.
    CategoricalDistribution shifted(double r) const;

    /// P(Z <= x).
    double cdf(double x) const;

    double mean() const;
    double raw_moment(int n) const;
    double min_atom() const { return atoms_.front(); }
    double max_atom() const { return atoms_.back(); }

private:
    CategoricalDistribution() = default;
    std::vector<double> atoms_;
    std::vector<double> weights_;
};

/// Total variation distance; atoms within `atom_tol` of each other are
/// treated as the same point.
double total_variation(const CategoricalDistribution& a, const CategoricalDistribution& b,
                       double atom_tol = 1e-9);

}  // namespace sketchrl
