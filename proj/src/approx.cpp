#include "sketchrl/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sketchrl/errors.hpp"
#include "sketchrl/rng.hpp"

namespace sketchrl {

namespace {

void check_shape(int H, int S, int A) {
    if (H < 1 || S < 1 || A < 1) throw BadDimensions("feature map shape must be positive");
}

double standard_normal(Rng& rng) {
    // Box-Muller; keeps streams identical across standard libraries
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const FeatureMap* features_of(const FunctionClass& cls) {
    if (auto* lin = std::get_if<LinearFunctionClass>(&cls)) return &lin->features;
    return nullptr;
}

std::size_t key_count(const FunctionClass& cls) {
    if (auto* lin = std::get_if<LinearFunctionClass>(&cls)) return lin->features.num_keys();
    return std::get<EnumeratedFunctionClass>(cls).num_keys();
}

std::size_t key_of(const FunctionClass& cls, int h, int s, int a) {
    if (auto* lin = std::get_if<LinearFunctionClass>(&cls)) {
        const auto& f = lin->features;
        if (h < 0 || h >= f.horizon() || s < 0 || s >= f.num_states() || a < 0 || a >= f.num_actions())
            throw IndexOutOfRange("(h, s, a) outside the feature map");
        return f.key(h, s, a);
    }
    const auto& e = std::get<EnumeratedFunctionClass>(cls);
    if (h < 0 || h >= e.H || s < 0 || s >= e.S || a < 0 || a >= e.A)
        throw IndexOutOfRange("(h, s, a) outside the enumerated class");
    return e.key(h, s, a);
}

/// Squared ‖f_i - center‖²_𝒵 with 𝒵 given by key multiplicities.
double distance_to(const EnumeratedFunctionClass& cls, std::size_t i, std::size_t center,
                   const Eigen::VectorXd& count) {
    double total = 0.0;
    for (std::size_t key = 0; key < cls.num_keys(); ++key) {
        const double c = count[static_cast<Eigen::Index>(key)];
        if (c == 0.0) continue;
        for (int n = 0; n < cls.N; ++n) {
            const double d = cls.value(i, key, n) - cls.value(center, key, n);
            total += c * d * d;
        }
    }
    return total;
}

}  // namespace

FeatureMap::FeatureMap(int H, int S, int A, Eigen::MatrixXd phi, std::string kind)
    : H_(H), S_(S), A_(A), phi_(std::move(phi)), kind_(std::move(kind)) {}

FeatureMap FeatureMap::tabular_onehot(int H, int S, int A, bool per_step) {
    check_shape(H, S, A);
    const Eigen::Index d = per_step ? static_cast<Eigen::Index>(H) * S * A : static_cast<Eigen::Index>(S) * A;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H) * S * A, d);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const Eigen::Index row = (static_cast<Eigen::Index>(h) * S + s) * A + a;
                const Eigen::Index col = per_step ? row : static_cast<Eigen::Index>(s) * A + a;
                phi(row, col) = 1.0;
            }
    return FeatureMap(H, S, A, std::move(phi), per_step ? "tabular_onehot_per_step" : "tabular_onehot");
}

FeatureMap FeatureMap::random_fourier(int H, int S, int A, int d, std::uint64_t seed) {
    check_shape(H, S, A);
    if (d < 1) throw BadDimensions("feature dimension must be positive");
    Rng rng = make_stream(seed, {0x72666eULL});
    Eigen::MatrixXd omega(d, 3);
    Eigen::VectorXd offset(d);
    for (int j = 0; j < d; ++j) {
        for (int c = 0; c < 3; ++c) omega(j, c) = 2.0 * standard_normal(rng);
        offset[j] = 2.0 * std::numbers::pi * uniform01(rng);
    }
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(H) * S * A, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const Eigen::Vector3d u((h + 0.5) / H, (s + 0.5) / S, (a + 0.5) / A);
                const Eigen::Index row = (static_cast<Eigen::Index>(h) * S + s) * A + a;
                for (int j = 0; j < d; ++j) phi(row, j) = scale * std::cos(omega.row(j).dot(u) + offset[j]);
            }
    return FeatureMap(H, S, A, std::move(phi), "random_fourier");
}

FeatureMap FeatureMap::lookup(int H, int S, int A, int d, const std::vector<double>& table) {
    check_shape(H, S, A);
    if (d < 1) throw BadDimensions("feature dimension must be positive");
    const std::size_t rows = static_cast<std::size_t>(H) * S * A;
    if (table.size() != rows * static_cast<std::size_t>(d))
        throw BadDimensions("feature table has " + std::to_string(table.size()) + " entries, expected " +
                            std::to_string(rows * static_cast<std::size_t>(d)));
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(rows), d);
    for (std::size_t i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) {
            const double v = table[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
            if (!std::isfinite(v)) throw BadDimensions("feature table has a non-finite entry");
            phi(static_cast<Eigen::Index>(i), j) = v;
        }
    return FeatureMap(H, S, A, std::move(phi), "lookup");
}

double FeatureMap::bound() const {
    return phi_.rows() == 0 ? 0.0 : phi_.rowwise().norm().maxCoeff();
}

void EnumeratedFunctionClass::validate() const {
    if (H < 1 || S < 1 || A < 1 || N < 1) throw BadDimensions("enumerated class shape must be positive");
    if (tables.empty()) throw BadDimensions("enumerated class is empty");
    const std::size_t expected = num_keys() * static_cast<std::size_t>(N);
    for (const auto& t : tables) {
        if (t.size() != expected)
            throw BadDimensions("enumerated table has " + std::to_string(t.size()) + " entries, expected " +
                                std::to_string(expected));
        for (double v : t)
            if (!std::isfinite(v)) throw BadDimensions("enumerated table has a non-finite entry");
    }
}

int output_count(const FunctionClass& cls) {
    return std::visit([](const auto& c) { return c.N; }, cls);
}

void RegressionDataset::validate() const {
    if (N < 1) throw BadDimensions("dataset needs N >= 1");
    if (!(H > 0.0)) throw BadDimensions("dataset needs H > 0");
    for (const auto& row : rows) {
        if (row.target.size() != static_cast<std::size_t>(N))
            throw BadDimensions("row target has " + std::to_string(row.target.size()) + " entries, expected " +
                                std::to_string(N));
        for (int n = 1; n <= N; ++n) {
            const double bound = std::pow(H + 1.0, n) / std::pow(H, n - 1);
            const double v = row.target[static_cast<std::size_t>(n - 1)];
            if (!std::isfinite(v) || std::abs(v) > bound * (1.0 + 1e-12))
                throw InvalidMomentSequence("target " + std::to_string(n) + " = " + std::to_string(v) +
                                            " outside +-" + std::to_string(bound));
        }
    }
}

KeyedStats stats_from_dataset(const RegressionDataset& data, const FunctionClass& cls) {
    const int N = output_count(cls);
    if (data.N != N) throw BadDimensions("dataset N does not match the function class");
    data.validate();
    KeyedStats stats(key_count(cls), N);
    for (const auto& row : data.rows) {
        const auto key = static_cast<Eigen::Index>(key_of(cls, row.h, row.s, row.a));
        stats.count[key] += 1.0;
        for (int n = 0; n < N; ++n) stats.target_sum(key, n) += row.target[static_cast<std::size_t>(n)];
    }
    return stats;
}

FittedFunction fit_from_stats(const KeyedStats& stats, const FunctionClass& cls, double ridge,
                              const Eigen::MatrixXd* gram) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw BadParams("ridge must be finite and >= 0");
    const auto keys = static_cast<Eigen::Index>(key_count(cls));
    const int N = output_count(cls);
    if (stats.count.size() != keys || stats.target_sum.rows() != keys || stats.target_sum.cols() != N)
        throw BadDimensions("statistics do not match the function class");

    if (const FeatureMap* phi = features_of(cls)) {
        const Eigen::MatrixXd& F = phi->matrix();
        const Eigen::Index d = F.cols();
        LinearFit fit;
        if (gram) {
            if (gram->rows() != d || gram->cols() != d) throw BadDimensions("Gram matrix has the wrong size");
            fit.gram = *gram;
        } else {
            fit.gram = ridge * Eigen::MatrixXd::Identity(d, d) + F.transpose() * stats.count.asDiagonal() * F;
        }
        if (ridge == 0.0) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.gram, Eigen::EigenvaluesOnly);
            const double top = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
            if (eig.eigenvalues().minCoeff() <= 1e-12 * top)
                throw SingularGram("Gram matrix is rank-deficient and ridge = 0");
        }
        fit.factor.compute(fit.gram);
        if (fit.factor.info() != Eigen::Success) throw SingularGram("Cholesky factorization failed");
        const Eigen::MatrixXd rhs = F.transpose() * stats.target_sum;  // d x N
        fit.W = fit.factor.solve(rhs).transpose();
        return fit;
    }

    const auto& e = std::get<EnumeratedFunctionClass>(cls);
    e.validate();
    // Σ_rows (f - y)² = Σ_keys [count f² - 2 f Σy] + const
    EnumeratedFit fit;
    fit.count = stats.count;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e.size(); ++i) {
        double loss = 0.0;
        for (Eigen::Index key = 0; key < keys; ++key) {
            const double c = stats.count[key];
            if (c == 0.0) continue;
            for (int n = 0; n < N; ++n) {
                const double f = e.value(i, static_cast<std::size_t>(key), n);
                loss += c * f * f - 2.0 * f * stats.target_sum(key, n);
            }
        }
        if (loss < best) {
            best = loss;
            fit.member = i;
        }
    }
    return fit;
}

FittedFunction fit_moment_regression(const RegressionDataset& data, const FunctionClass& cls, double ridge) {
    return fit_from_stats(stats_from_dataset(data, cls), cls, ridge);
}

double evaluate(const FittedFunction& f, const FunctionClass& cls, int h, int s, int a, int n) {
    const int N = output_count(cls);
    if (n < 0 || n >= N) throw IndexOutOfRange("output index " + std::to_string(n));
    const std::size_t key = key_of(cls, h, s, a);
    if (const auto* lin = std::get_if<LinearFit>(&f)) {
        const auto& c = std::get<LinearFunctionClass>(cls);
        const double v = lin->W.row(n).dot(c.features.matrix().row(static_cast<Eigen::Index>(key)));
        return std::clamp(v, -c.clip, c.clip);
    }
    const auto& e = std::get<EnumeratedFunctionClass>(cls);
    return e.value(std::get<EnumeratedFit>(f).member, key, n);
}

double beta_threshold(int N, double H, double T, double delta, double log_cover, double c_scale) {
    return c_scale * N * H * H * (std::log(T / delta) + log_cover);
}

double default_linear_log_cover(int N, int d, double T, double H, double feature_bound) {
    return N * d * std::log(1.0 + T * H * feature_bound);
}

Width width_first_component(const ConfidenceRegion& region, const FunctionClass& cls, int h, int s, int a) {
    const std::size_t key = key_of(cls, h, s, a);
    const double beta = std::max(region.beta, 0.0);
    if (const auto* lin = std::get_if<LinearFit>(&region.center)) {
        const auto& c = std::get<LinearFunctionClass>(cls);
        const Eigen::VectorXd phi = c.features.matrix().row(static_cast<Eigen::Index>(key)).transpose();
        const double q = phi.dot(lin->factor.solve(phi));
        return {2.0 * std::sqrt(beta) * std::sqrt(std::max(q, 0.0)), false};
    }
    const auto& e = std::get<EnumeratedFunctionClass>(cls);
    const auto& fit = std::get<EnumeratedFit>(region.center);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (distance_to(e, i, fit.member, fit.count) > beta) continue;
        const double v = e.value(i, key, 0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo > hi) return {0.0, true};
    return {hi - lo, false};
}

}  // namespace sketchrl
