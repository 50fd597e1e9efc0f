#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sketchrl/distribution.hpp"

namespace sketchrl {

enum class SketchKind {
    moments,          // (m_1, ..., m_N), optionally normalized by H_bound^{n-1}
    central_moments,  // (mean, μ_2, ..., μ_N)
    mean_variance,    // (mean, variance)
    variance,         // (variance) on its own
    quantile,         // α-quantile, left-continuous inverse
    median,           // quantile at 1/2
    max,
    min,
    categorical,      // probability mass on a fixed grid
    exp_utility,      // (1/λ) log E[exp(λ Z)]
};

std::string to_string(SketchKind kind);
SketchKind sketch_kind_from_string(const std::string& name);

struct SketchSpec {
    SketchKind kind = SketchKind::moments;
    int N = 1;
    double alpha = 0.5;
    std::vector<double> grid;
    double lambda = 1.0;
    /// Moments only: values are E[Z^n] / H_bound^{n-1}. 1 means raw moments.
    double H_bound = 1.0;

    static SketchSpec moments(int N, double H_bound = 1.0);
    static SketchSpec central_moments(int N);
    static SketchSpec mean_variance();
    static SketchSpec variance();
    static SketchSpec quantile(double alpha);
    static SketchSpec median();
    static SketchSpec max();
    static SketchSpec min();
    static SketchSpec categorical(std::vector<double> grid);
    static SketchSpec exp_utility(double lambda);

    /// Number of values compute_sketch returns.
    std::size_t dimension() const;
    /// Throws BadSpec if a parameter is out of range.
    void validate() const;
    std::string name() const;
};

/// Exact sketch of a categorical distribution.
std::vector<double> compute_sketch(const CategoricalDistribution& dist, const SketchSpec& spec);

// ---- moment calculus ---------------------------------------------------------

/// Raw moments m_0..m_N of a return distribution supported on [0, H_bound].
class MomentSketch {
public:
    /// m_0 must equal 1 exactly and there must be at least one moment past it.
    MomentSketch(double H_bound, std::vector<double> raw);

    /// Moments of `dist`. Checks 0 <= m_n <= H_bound^n and Hankel
    /// positive semidefiniteness to 1e-9; throws InvalidMomentSequence otherwise.
    static MomentSketch from_distribution(const CategoricalDistribution& dist, int N, double H_bound);

    double H_bound() const { return H_bound_; }
    int order() const { return static_cast<int>(raw_.size()) - 1; }
    double operator[](int n) const { return raw_[static_cast<std::size_t>(n)]; }
    const std::vector<double>& raw() const { return raw_; }

private:
    double H_bound_;
    std::vector<double> raw_;
};

/// Smallest eigenvalue of the Hankel matrix [m_{i+j}], i, j <= N/2.
double hankel_min_eigenvalue(std::span<const double> raw);

/// Moments of r + Z: m'_n = Σ_j C(n, j) m_j r^{n-j}.
MomentSketch pushforward_moments(const MomentSketch& m, double r);

/// Moments of the mixture Σ w_i η_i. Throws WeightsNotSimplex, MixedDimensions, EmptyInput.
MomentSketch mixture_moments(std::span<const std::pair<double, MomentSketch>> components);

/// ψ_n = m_n / H_bound^{n-1}, n = 1..N.
std::vector<double> normalize_moments(const MomentSketch& m);
MomentSketch denormalize_moments(std::span<const double> psi, double H_bound);

/// Central moments of order 2..N (the first entry is the variance).
/// Throws NeedAtLeastTwoMoments when N < 2.
std::vector<double> moments_to_central(const MomentSketch& m);

/// Inverse of moments_to_central given the mean.
MomentSketch central_to_moments(double mean, std::span<const double> central, double H_bound = 1.0);

double binomial(int n, int k);

// ---- estimators --------------------------------------------------------------

/// Unbiased estimate of the (mean, variance) of the mixture from k sampled
/// component sketches: mean of the means, Bessel-corrected spread of the
/// means plus the average component variance. k = 1 returns the sample.
std::pair<double, double> mean_variance_combine(std::span<const std::pair<double, double>> samples);

/// Plug-in form (1/k) Σ [(μ_i - μ̂)² + σ_i²]. Its expectation falls short
/// of the mixture variance by Var(μ)/k.
std::pair<double, double> mean_variance_combine_plugin(std::span<const std::pair<double, double>> samples);

/// Average of `kernel` over all ordered `degree`-tuples of distinct sample
/// indices. Throws TooFewSamples when samples.size() < degree.
double u_statistic_estimate(const std::function<double(std::span<const double>)>& kernel, int degree,
                            std::span<const double> samples);

/// Same construction over sample indices, for kernels on structured samples.
double u_statistic_over_indices(std::size_t sample_count, int degree,
                                const std::function<double(std::span<const std::size_t>)>& kernel);

enum class Combiner {
    average,               // component-wise mean of the sampled sketches
    extreme,               // component-wise max (max sketch) or min (min sketch)
    mean_variance,         // mean_variance_combine
    mean_variance_plugin,  // mean_variance_combine_plugin
    central_u_statistic,   // U-statistics on raw moments, for (mean, central moments)
};

std::string to_string(Combiner c);
Combiner combiner_from_string(const std::string& name);

/// Throws BadCombiner if the combiner is not defined for the sketch kind.
void check_combiner(const SketchSpec& spec, Combiner c);

/// Applies a combiner to k sketches of sampled next-state distributions.
std::vector<double> combine_sketches(const SketchSpec& spec, Combiner c,
                                     std::span<const std::vector<double>> samples);

// ---- Bellman backups ---------------------------------------------------------

/// One entry per successor state: (P(s'|s,a), sketch of η̄(s')).
using SketchTransition = std::pair<double, std::vector<double>>;

/// Sketch of (B_r)# Σ p_i η_i computed from the component sketches alone.
/// Throws NotBellmanClosed for kinds that admit no such map (quantile,
/// median, variance on its own, categorical) and WeightsNotSimplex.
std::vector<double> sketch_bellman_backup(const SketchSpec& spec,
                                          std::span<const SketchTransition> next, double r);

/// The natural candidate operator for a categorical sketch: mix the grid
/// masses, shift the grid by r and project back. Not exact in general.
std::vector<double> categorical_projected_backup(const SketchSpec& spec,
                                                 std::span<const SketchTransition> next, double r);

}  // namespace sketchrl
