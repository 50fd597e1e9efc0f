#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace sketchrl {

/// Tabulated feature map φ(h, s, a) ∈ R^d over a finite MDP shape.
class FeatureMap {
public:
    /// One-hot over (s, a), or over (h, s, a) when per_step is set.
    static FeatureMap tabular_onehot(int H, int S, int A, bool per_step = false);
    /// Random cosine features of the normalized (h, s, a) coordinates,
    /// scaled so that ||φ|| <= 1.
    static FeatureMap random_fourier(int H, int S, int A, int d, std::uint64_t seed);
    /// Explicit table, row-major [H][S][A][d].
    static FeatureMap lookup(int H, int S, int A, int d, const std::vector<double>& table);

    int dimension() const { return static_cast<int>(phi_.cols()); }
    int horizon() const { return H_; }
    int num_states() const { return S_; }
    int num_actions() const { return A_; }
    std::size_t num_keys() const { return static_cast<std::size_t>(phi_.rows()); }
    std::size_t key(int h, int s, int a) const { return (static_cast<std::size_t>(h) * S_ + s) * A_ + a; }

    Eigen::VectorXd operator()(int h, int s, int a) const { return phi_.row(static_cast<Eigen::Index>(key(h, s, a))).transpose(); }
    /// All feature vectors, one row per (h, s, a) key.
    const Eigen::MatrixXd& matrix() const { return phi_; }
    /// max ||φ||_2 over all keys.
    double bound() const;
    const std::string& kind() const { return kind_; }

private:
    FeatureMap(int H, int S, int A, Eigen::MatrixXd phi, std::string kind);
    int H_, S_, A_;
    Eigen::MatrixXd phi_;
    std::string kind_;
};

/// f^{(n)}(h, s, a) = <W_n, φ(h, s, a)>, read clipped to [-clip, clip].
struct LinearFunctionClass {
    FeatureMap features;
    int N = 1;
    double clip = 1.0;
};

/// Explicit finite class; each table is row-major [H][S][A][N].
struct EnumeratedFunctionClass {
    int H = 1, S = 1, A = 1, N = 1;
    std::vector<std::vector<double>> tables;

    std::size_t size() const { return tables.size(); }
    std::size_t num_keys() const { return static_cast<std::size_t>(H) * S * A; }
    std::size_t key(int h, int s, int a) const { return (static_cast<std::size_t>(h) * S + s) * A + a; }
    double value(std::size_t member, std::size_t key, int n) const {
        return tables[member][key * static_cast<std::size_t>(N) + static_cast<std::size_t>(n)];
    }
    /// Throws BadDimensions on empty class or ragged tables.
    void validate() const;
};

using FunctionClass = std::variant<LinearFunctionClass, EnumeratedFunctionClass>;

int output_count(const FunctionClass& cls);

/// One regression row: features at (h, s, a), N normalized-moment targets.
struct RegressionRow {
    int h = 0, s = 0, a = 0;
    std::vector<double> target;
    int episode = -1;  // provenance
    int step = -1;
};

struct RegressionDataset {
    int N = 1;
    double H = 1.0;
    std::vector<RegressionRow> rows;

    /// Target n (1-based order) must lie within (H + 1)^n / H^{n-1}, the
    /// largest normalized moment of a [0, H]-supported return shifted by r <= 1.
    void validate() const;
};

/// Least-squares sufficient statistics keyed by (h, s, a): multiplicity
/// and per-output target sums. Both class kinds fit from these alone.
struct KeyedStats {
    Eigen::VectorXd count;       // [keys]
    Eigen::MatrixXd target_sum;  // [keys x N]

    KeyedStats(std::size_t keys, int N) : count(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keys))),
        target_sum(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(keys), N)) {}
};

/// Fitted f̃ plus the geometry needed for its confidence region.
struct LinearFit {
    Eigen::MatrixXd W;     // N x d
    Eigen::MatrixXd gram;  // λI + Σ φφᵀ
    Eigen::LLT<Eigen::MatrixXd> factor;
};

struct EnumeratedFit {
    std::size_t member = 0;
    Eigen::VectorXd count;  // multiplicity of each key in the data
};

using FittedFunction = std::variant<LinearFit, EnumeratedFit>;

/// Raw output n (0-based) of the fitted function; linear outputs are clipped.
double evaluate(const FittedFunction& f, const FunctionClass& cls, int h, int s, int a, int n);

/// Ridge solution sharing one factorization across the N outputs (linear),
/// or the lowest-index member minimizing the summed squared error (enumerated).
/// Throws SingularGram when λ = 0 and the Gram matrix is rank-deficient.
FittedFunction fit_moment_regression(const RegressionDataset& data, const FunctionClass& cls, double ridge);

/// Same fit from precomputed statistics. For linear classes `gram` may be
/// supplied (it must equal λI + Σ_keys count φφᵀ) to skip its rebuild.
FittedFunction fit_from_stats(const KeyedStats& stats, const FunctionClass& cls, double ridge,
                              const Eigen::MatrixXd* gram = nullptr);

KeyedStats stats_from_dataset(const RegressionDataset& data, const FunctionClass& cls);

/// β = c_scale · N · H² · (log(T/δ) + log_cover).
double beta_threshold(int N, double H, double T, double delta, double log_cover, double c_scale);

/// N · d · log(1 + T · H · B_φ): covering-number proxy for a bounded linear class.
double default_linear_log_cover(int N, int d, double T, double H, double feature_bound);

struct ConfidenceRegion {
    FittedFunction center;
    double beta = 0.0;
};

struct Width {
    double value = 0.0;
    bool empty_region = false;  // enumerated only: nothing within β, value forced to 0
};

/// w^{(1)}: linear classes 2√β ||φ||_{Λ^{-1}}; enumerated classes the exact
/// spread of output 1 over members within β of the center.
Width width_first_component(const ConfidenceRegion& region, const FunctionClass& cls, int h, int s, int a);

// ---- eluder dimension -----------------------------------------------------------

struct Point {
    int h = 0, s = 0, a = 0;
    bool operator==(const Point&) const = default;
};

/// True iff every pair f, g with ||f - g||_sequence <= eps also has
/// |f^{(1)}(point) - g^{(1)}(point)| <= eps.
bool epsilon_dependent(const Point& point, const std::vector<Point>& sequence,
                       const EnumeratedFunctionClass& cls, double eps);

enum class EluderMode { exact, greedy };

inline constexpr std::size_t kMaxExactEluderPoints = 8;

/// Length of the longest sequence in which every element is ε'-independent
/// of its predecessors. Exact mode searches all orderings (memoized on the
/// predecessor set) and requires at most 8 points; greedy mode extends from
/// each start by the lowest-index independent point and is a lower bound.
/// With `eps_sweep` the search is repeated at every ε' in the sweep that is
/// >= eps and the longest result returned.
int eluder_dimension(const EnumeratedFunctionClass& cls, double eps, EluderMode mode,
                     const std::vector<double>& eps_sweep = {});

}  // namespace sketchrl
