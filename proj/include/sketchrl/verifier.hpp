#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sketchrl/distribution.hpp"
#include "sketchrl/mdp.hpp"
#include "sketchrl/rng.hpp"
#include "sketchrl/sketch.hpp"

namespace sketchrl {

enum class Verdict { yes, no, unknown };
std::string to_string(Verdict v);

/// Two mixtures whose components have equal sketches but whose mixtures
/// do not: ψ(η1) = ψ(η1'), ψ(η2) = ψ(η2'), yet
/// ψ(ν η1 + (1-ν) η2) != ψ(ν η1' + (1-ν) η2').
struct WitnessPair {
    double nu = 0.5;
    CategoricalDistribution eta1, eta2, eta1p, eta2p;
    SketchSpec spec;

    CategoricalDistribution mixture() const;
    CategoricalDistribution mixture_prime() const;
    /// Components agree under the sketch within `tol`.
    bool components_match(double tol = 1e-10) const;
    /// Largest component-wise gap between the two mixture sketches.
    double mixture_gap() const;
};

using SketchFunction = std::function<std::vector<double>(const CategoricalDistribution&)>;

struct MixtureConsistencyResult {
    Verdict verdict = Verdict::unknown;
    std::optional<WitnessPair> witness;
    std::string check_id;   // which construction or closed form settled it
    int trials = 0;         // randomized positive trials run
    double max_error = 0.0; // worst closed-form error over those trials
};

/// Known analytic cases: closed-form mixing functions verified on 10^3
/// random mixtures (moments, central moments, mean-variance, max, min,
/// exp utility, categorical) or a concrete witness (median, quantile,
/// variance alone).
MixtureConsistencyResult check_mixture_consistency(const SketchSpec& spec, std::uint64_t seed = 7);

/// User-supplied sketch with no known mixing function: bounded search for
/// a witness over two-atom distributions on a grid. Returns `no` with the
/// witness, or `unknown`.
MixtureConsistencyResult check_mixture_consistency(const SketchFunction& sketch, std::uint64_t seed = 7);

/// Witness constructions.
WitnessPair median_witness(double k = 0.3, double k_prime = 0.7);
WitnessPair quantile_witness(double alpha);
WitnessPair variance_witness(double k = 0.0, double k_prime = 1.0);

struct PolicyInstance {
    EpisodicMdp mdp;
    Policy policy;
};

struct ClosednessResult {
    Verdict verdict = Verdict::unknown;
    double max_error = 0.0;
    bool raised_not_closed = false;
    int instances = 0;
};

/// Iterates the sketch backup backward over each instance and compares it
/// with the sketch of the exact return distribution at every (h, s, a).
/// Categorical sketches use categorical_projected_backup.
ClosednessResult check_bellman_closedness(const SketchSpec& spec, std::span<const PolicyInstance> instances,
                                          double tol = 1e-8);

struct UnbiasednessResult {
    std::vector<double> target;  // sketch of the exact mixture
    std::vector<double> bias;    // empirical mean - target
    std::vector<double> z;       // bias / standard error
    double max_abs_z = 0.0;
    int k = 0;
    int trials = 0;
};

/// Two-stage estimate check at (h = 0, s = 0, a = 0): draws k successors
/// i.i.d. from P_0(.|0,0), combines the sketches of (B_r)# η̄_1(s'_i), and
/// compares the mean over `trials` repetitions with the exact sketch.
UnbiasednessResult check_bellman_unbiasedness(const SketchSpec& spec, Combiner combiner, const EpisodicMdp& mdp,
                                              int k, int trials, Rng& rng);

/// Region of the classification diagram implied by the two flags.
std::string region_label(Verdict bellman_closed, Verdict bellman_unbiased);

struct KindReport {
    SketchSpec spec;
    Combiner combiner = Combiner::average;
    MixtureConsistencyResult mixture;
    ClosednessResult closedness;
    Verdict bellman_unbiased = Verdict::unknown;
    double worst_abs_z = 0.0;
    std::vector<UnbiasednessResult> unbiasedness;
    std::string region;
};

struct ClassificationConfig {
    int trials = 100'000;
    std::vector<int> ks{2, 3, 5};
    int closedness_instances = 10;
    std::uint64_t seed = 2024;
    double z_threshold = 3.0;
};

struct ClassificationReport {
    std::vector<KindReport> kinds;

    /// kind name -> region, the part compared against the golden table.
    nlohmann::json regions() const;
    nlohmann::json to_json() const;
};

/// The sketch suite that gets classified, with the combiner tested for each.
std::vector<std::pair<SketchSpec, Combiner>> classification_suite();

/// The fixed two-stage MDPs used by the unbiasedness checks.
std::vector<EpisodicMdp> unbiasedness_mdps();

/// Random (MDP, policy) pairs under the trajectory guard: S <= 4, A <= 2, H <= 4.
std::vector<PolicyInstance> random_policy_instances(int count, std::uint64_t seed);

ClassificationReport classify_functionals(const ClassificationConfig& cfg = {});

/// Expected region table.
nlohmann::json golden_regions();

}  // namespace sketchrl
