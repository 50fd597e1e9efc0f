#include "sketchrl/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sketchrl/errors.hpp"

namespace sketchrl {

CategoricalDistribution::CategoricalDistribution(std::vector<double> atoms,
                                                 std::vector<double> weights) {
    if (atoms.size() != weights.size())
        throw InvalidDistribution("atoms/weights length mismatch");
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });

    double total = 0.0;
    for (std::size_t i : order) {
        const double x = atoms[i];
        const double w = weights[i];
        if (!std::isfinite(x) || !std::isfinite(w))
            throw InvalidDistribution("non-finite atom or weight");
        if (w < 0.0) throw InvalidDistribution("negative weight " + std::to_string(w));
        total += w;
        if (w == 0.0) continue;
        if (!atoms_.empty() && std::abs(x - atoms_.back()) <= kAtomMergeTol) {
            weights_.back() += w;
        } else {
            atoms_.push_back(x);
            weights_.push_back(w);
        }
    }
    if (atoms_.empty()) throw InvalidDistribution("empty support");
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidDistribution("total mass " + std::to_string(total) + " != 1");
}

CategoricalDistribution CategoricalDistribution::dirac(double x) {
    CategoricalDistribution d;
    d.atoms_ = {x};
    d.weights_ = {1.0};
    return d;
}

CategoricalDistribution CategoricalDistribution::mixture(
    std::span<const std::pair<double, CategoricalDistribution>> components) {
    std::vector<double> atoms;
    std::vector<double> weights;
    for (const auto& [w, dist] : components) {
        if (w < 0.0) throw InvalidDistribution("negative mixture weight");
        for (std::size_t i = 0; i < dist.size(); ++i) {
            atoms.push_back(dist.atoms_[i]);
            weights.push_back(w * dist.weights_[i]);
        }
    }
    return CategoricalDistribution(std::move(atoms), std::move(weights));
}

CategoricalDistribution CategoricalDistribution::shifted(double r) const {
    CategoricalDistribution d = *this;
    for (auto& x : d.atoms_) x = r + x;
    // a shift can collapse atoms that were just over the tolerance apart
    return CategoricalDistribution(std::move(d.atoms_), std::move(d.weights_));
}

double CategoricalDistribution::cdf(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms_.size() && atoms_[i] <= x; ++i) acc += weights_[i];
    return acc;
}

double CategoricalDistribution::mean() const { return raw_moment(1); }

double CategoricalDistribution::raw_moment(int n) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) acc += weights_[i] * std::pow(atoms_[i], n);
    return acc;
}

double total_variation(const CategoricalDistribution& a, const CategoricalDistribution& b,
                       double atom_tol) {
    const auto& xa = a.atoms();
    const auto& xb = b.atoms();
    const auto& wa = a.weights();
    const auto& wb = b.weights();
    std::size_t i = 0, j = 0;
    double acc = 0.0;
    while (i < xa.size() || j < xb.size()) {
        if (j == xb.size() || (i < xa.size() && xa[i] < xb[j] - atom_tol)) {
            acc += wa[i++];
        } else if (i == xa.size() || xb[j] < xa[i] - atom_tol) {
            acc += wb[j++];
        } else {
            acc += std::abs(wa[i++] - wb[j++]);
        }
    }
    return 0.5 * acc;
}

}  // namespace sketchrl
