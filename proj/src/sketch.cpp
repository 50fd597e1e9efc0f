#include "sketchrl/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "sketchrl/errors.hpp"

namespace sketchrl {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kCdfTol = 1e-12;

double log_sum_exp(std::span<const double> log_weights, std::span<const double> exponents) {
    double top = -std::numeric_limits<double>::infinity();
    for (double e : exponents) top = std::max(top, e);
    double acc = 0.0;
    for (std::size_t i = 0; i < exponents.size(); ++i) acc += std::exp(log_weights[i] + exponents[i] - top);
    return top + std::log(acc);
}

void check_simplex(std::span<const SketchTransition> next) {
    if (next.empty()) throw EmptyInput("no successor sketches");
    double sum = 0.0;
    for (const auto& [p, v] : next) {
        if (!(p >= 0.0)) throw WeightsNotSimplex("negative transition weight");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) throw WeightsNotSimplex("transition weights do not sum to 1");
}

double quantile_of(const CategoricalDistribution& d, double alpha) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        acc += d.weights()[i];
        if (acc + kCdfTol >= alpha) return d.atoms()[i];
    }
    return d.atoms().back();
}

std::vector<double> project_to_grid(std::span<const double> atoms, std::span<const double> weights,
                                    std::span<const double> grid) {
    std::vector<double> mass(grid.size(), 0.0);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto it = std::lower_bound(grid.begin(), grid.end(), atoms[i]);
        std::size_t j;
        if (it == grid.begin()) {
            j = 0;
        } else if (it == grid.end()) {
            j = grid.size() - 1;
        } else {
            const auto hi = static_cast<std::size_t>(it - grid.begin());
            // ties go to the lower grid point
            j = (atoms[i] - grid[hi - 1] <= grid[hi] - atoms[i]) ? hi - 1 : hi;
        }
        mass[j] += weights[i];
    }
    return mass;
}

std::vector<double> central_from_distribution(const CategoricalDistribution& d, int N) {
    const double mu = d.mean();
    std::vector<double> out{mu};
    for (int n = 2; n <= N; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) acc += d.weights()[i] * std::pow(d.atoms()[i] - mu, n);
        out.push_back(acc);
    }
    return out;
}

}  // namespace

// ---- SketchSpec -------------------------------------------------------------------

std::string to_string(SketchKind kind) {
    switch (kind) {
        case SketchKind::moments: return "moments";
        case SketchKind::central_moments: return "central_moments";
        case SketchKind::mean_variance: return "mean_variance";
        case SketchKind::variance: return "variance";
        case SketchKind::quantile: return "quantile";
        case SketchKind::median: return "median";
        case SketchKind::max: return "max";
        case SketchKind::min: return "min";
        case SketchKind::categorical: return "categorical";
        case SketchKind::exp_utility: return "exp_utility";
    }
    return "unknown";
}

SketchKind sketch_kind_from_string(const std::string& name) {
    for (auto k : {SketchKind::moments, SketchKind::central_moments, SketchKind::mean_variance,
                   SketchKind::variance, SketchKind::quantile, SketchKind::median, SketchKind::max,
                   SketchKind::min, SketchKind::categorical, SketchKind::exp_utility})
        if (to_string(k) == name) return k;
    throw BadSpec("unknown sketch kind '" + name + "'");
}

SketchSpec SketchSpec::moments(int N, double H_bound) {
    SketchSpec s;
    s.kind = SketchKind::moments;
    s.N = N;
    s.H_bound = H_bound;
    return s;
}
SketchSpec SketchSpec::central_moments(int N) {
    SketchSpec s;
    s.kind = SketchKind::central_moments;
    s.N = N;
    return s;
}
SketchSpec SketchSpec::mean_variance() {
    SketchSpec s;
    s.kind = SketchKind::mean_variance;
    s.N = 2;
    return s;
}
SketchSpec SketchSpec::variance() {
    SketchSpec s;
    s.kind = SketchKind::variance;
    return s;
}
SketchSpec SketchSpec::quantile(double alpha) {
    SketchSpec s;
    s.kind = SketchKind::quantile;
    s.alpha = alpha;
    return s;
}
SketchSpec SketchSpec::median() {
    SketchSpec s;
    s.kind = SketchKind::median;
    s.alpha = 0.5;
    return s;
}
SketchSpec SketchSpec::max() {
    SketchSpec s;
    s.kind = SketchKind::max;
    return s;
}
SketchSpec SketchSpec::min() {
    SketchSpec s;
    s.kind = SketchKind::min;
    return s;
}
SketchSpec SketchSpec::categorical(std::vector<double> grid) {
    SketchSpec s;
    s.kind = SketchKind::categorical;
    s.grid = std::move(grid);
    return s;
}
SketchSpec SketchSpec::exp_utility(double lambda) {
    SketchSpec s;
    s.kind = SketchKind::exp_utility;
    s.lambda = lambda;
    return s;
}

std::size_t SketchSpec::dimension() const {
    switch (kind) {
        case SketchKind::moments:
        case SketchKind::central_moments: return static_cast<std::size_t>(N);
        case SketchKind::mean_variance: return 2;
        case SketchKind::categorical: return grid.size();
        default: return 1;
    }
}

void SketchSpec::validate() const {
    switch (kind) {
        case SketchKind::moments:
            if (N < 1) throw BadSpec("moments needs N >= 1");
            if (!(H_bound > 0.0)) throw BadSpec("H_bound must be positive");
            break;
        case SketchKind::central_moments:
            if (N < 2) throw BadSpec("central_moments needs N >= 2");
            break;
        case SketchKind::quantile:
            if (!(alpha > 0.0 && alpha < 1.0)) throw BadSpec("quantile level must be in (0, 1)");
            break;
        case SketchKind::categorical:
            if (grid.empty()) throw BadSpec("categorical grid is empty");
            for (std::size_t i = 1; i < grid.size(); ++i)
                if (!(grid[i] > grid[i - 1])) throw BadSpec("categorical grid must be strictly increasing");
            break;
        case SketchKind::exp_utility:
            if (lambda == 0.0 || !std::isfinite(lambda)) throw BadSpec("exp_utility needs a finite λ != 0");
            break;
        default: break;
    }
}

std::string SketchSpec::name() const {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };
    switch (kind) {
        case SketchKind::moments:
        case SketchKind::central_moments: return to_string(kind) + "(" + std::to_string(N) + ")";
        case SketchKind::quantile: return "quantile(" + num(alpha) + ")";
        case SketchKind::exp_utility: return "exp_utility(" + num(lambda) + ")";
        case SketchKind::categorical: return "categorical(" + std::to_string(grid.size()) + ")";
        default: return to_string(kind);
    }
}

std::vector<double> compute_sketch(const CategoricalDistribution& dist, const SketchSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case SketchKind::moments: {
            std::vector<double> out;
            for (int n = 1; n <= spec.N; ++n)
                out.push_back(dist.raw_moment(n) / std::pow(spec.H_bound, n - 1));
            return out;
        }
        case SketchKind::central_moments: return central_from_distribution(dist, spec.N);
        case SketchKind::mean_variance: return central_from_distribution(dist, 2);
        case SketchKind::variance: return {central_from_distribution(dist, 2)[1]};
        case SketchKind::quantile:
        case SketchKind::median: return {quantile_of(dist, spec.alpha)};
        case SketchKind::max: return {dist.max_atom()};
        case SketchKind::min: return {dist.min_atom()};
        case SketchKind::categorical: return project_to_grid(dist.atoms(), dist.weights(), spec.grid);
        case SketchKind::exp_utility: {
            std::vector<double> logw, expo;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                logw.push_back(std::log(dist.weights()[i]));
                expo.push_back(spec.lambda * dist.atoms()[i]);
            }
            return {log_sum_exp(logw, expo) / spec.lambda};
        }
    }
    throw BadSpec("unhandled sketch kind");
}

// ---- moment calculus ----------------------------------------------------------------

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return std::round(c);
}

MomentSketch::MomentSketch(double H_bound, std::vector<double> raw) : H_bound_(H_bound), raw_(std::move(raw)) {
    if (!(H_bound_ > 0.0)) throw BadParams("H_bound must be positive");
    if (raw_.size() < 2) throw BadParams("a moment sketch needs m_0 and at least m_1");
    if (raw_[0] != 1.0) throw InvalidMomentSequence("m_0 must equal 1");
}

double hankel_min_eigenvalue(std::span<const double> raw) {
    const int k = static_cast<int>(raw.size() - 1) / 2;
    Eigen::MatrixXd M(k + 1, k + 1);
    for (int i = 0; i <= k; ++i)
        for (int j = 0; j <= k; ++j) M(i, j) = raw[static_cast<std::size_t>(i + j)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

MomentSketch MomentSketch::from_distribution(const CategoricalDistribution& dist, int N, double H_bound) {
    if (N < 1) throw BadParams("need N >= 1");
    std::vector<double> raw{1.0};
    for (int n = 1; n <= N; ++n) raw.push_back(dist.raw_moment(n));
    MomentSketch m(H_bound, raw);
    double scale = 1.0;
    for (int n = 1; n <= N; ++n) {
        const double cap = std::pow(H_bound, n);
        scale = std::max(scale, std::abs(raw[n]));
        if (raw[n] < -1e-12 * cap || raw[n] > cap * (1.0 + 1e-12))
            throw InvalidMomentSequence("m_" + std::to_string(n) + " outside [0, H^n]");
    }
    if (hankel_min_eigenvalue(raw) < -1e-9 * scale)
        throw InvalidMomentSequence("Hankel matrix is not positive semidefinite");
    return m;
}

MomentSketch pushforward_moments(const MomentSketch& m, double r) {
    const int N = m.order();
    std::vector<double> out(static_cast<std::size_t>(N) + 1, 0.0);
    out[0] = 1.0;
    for (int n = 1; n <= N; ++n) {
        double acc = 0.0;
        for (int j = 0; j <= n; ++j) acc += binomial(n, j) * m[j] * std::pow(r, n - j);
        out[n] = acc;
    }
    return MomentSketch(m.H_bound(), std::move(out));
}

MomentSketch mixture_moments(std::span<const std::pair<double, MomentSketch>> components) {
    if (components.empty()) throw EmptyInput("no mixture components");
    const int N = components.front().second.order();
    const double H = components.front().second.H_bound();
    double total = 0.0;
    for (const auto& [w, m] : components) {
        if (!(w >= 0.0)) throw WeightsNotSimplex("negative mixture weight");
        if (m.order() != N || m.H_bound() != H)
            throw MixedDimensions("components disagree on N or H_bound");
        total += w;
    }
    if (std::abs(total - 1.0) > kSimplexTol) throw WeightsNotSimplex("mixture weights do not sum to 1");
    std::vector<double> out(static_cast<std::size_t>(N) + 1, 0.0);
    for (int n = 1; n <= N; ++n)
        for (const auto& [w, m] : components) out[n] += w * m[n];
    out[0] = 1.0;
    return MomentSketch(H, std::move(out));
}

std::vector<double> normalize_moments(const MomentSketch& m) {
    std::vector<double> psi;
    for (int n = 1; n <= m.order(); ++n) psi.push_back(m[n] / std::pow(m.H_bound(), n - 1));
    return psi;
}

MomentSketch denormalize_moments(std::span<const double> psi, double H_bound) {
    std::vector<double> raw{1.0};
    for (std::size_t i = 0; i < psi.size(); ++i)
        raw.push_back(psi[i] * std::pow(H_bound, static_cast<double>(i)));
    return MomentSketch(H_bound, std::move(raw));
}

std::vector<double> moments_to_central(const MomentSketch& m) {
    const int N = m.order();
    if (N < 2) throw NeedAtLeastTwoMoments("got N = " + std::to_string(N));
    const double mu = m[1];
    std::vector<double> out;
    for (int n = 2; n <= N; ++n) {
        double acc = 0.0;
        for (int j = 0; j <= n; ++j) acc += binomial(n, j) * m[j] * std::pow(-mu, n - j);
        out.push_back(acc);
    }
    return out;
}

MomentSketch central_to_moments(double mean, std::span<const double> central, double H_bound) {
    // m_n = Σ_j C(n, j) μ_j mean^{n-j} with μ_0 = 1, μ_1 = 0
    const int N = static_cast<int>(central.size()) + 1;
    auto mu = [&](int j) -> double {
        if (j == 0) return 1.0;
        if (j == 1) return 0.0;
        return central[static_cast<std::size_t>(j - 2)];
    };
    std::vector<double> raw{1.0};
    for (int n = 1; n <= N; ++n) {
        double acc = 0.0;
        for (int j = 0; j <= n; ++j) acc += binomial(n, j) * mu(j) * std::pow(mean, n - j);
        raw.push_back(acc);
    }
    return MomentSketch(H_bound, std::move(raw));
}

// ---- estimators -------------------------------------------------------------------

std::pair<double, double> mean_variance_combine(std::span<const std::pair<double, double>> samples) {
    if (samples.empty()) throw EmptyInput("no samples to combine");
    const auto k = static_cast<double>(samples.size());
    double mean = 0.0, within = 0.0;
    for (const auto& [mu, var] : samples) {
        mean += mu;
        within += var;
    }
    mean /= k;
    within /= k;
    if (samples.size() == 1) return {mean, within};
    double spread = 0.0;
    for (const auto& [mu, var] : samples) spread += (mu - mean) * (mu - mean);
    return {mean, spread / (k - 1.0) + within};
}

std::pair<double, double> mean_variance_combine_plugin(std::span<const std::pair<double, double>> samples) {
    if (samples.empty()) throw EmptyInput("no samples to combine");
    const auto k = static_cast<double>(samples.size());
    double mean = 0.0;
    for (const auto& [mu, var] : samples) mean += mu;
    mean /= k;
    double acc = 0.0;
    for (const auto& [mu, var] : samples) acc += (mu - mean) * (mu - mean) + var;
    return {mean, acc / k};
}

double u_statistic_over_indices(std::size_t sample_count, int degree,
                                const std::function<double(std::span<const std::size_t>)>& kernel) {
    if (degree < 1) throw BadParams("U-statistic degree must be >= 1");
    if (sample_count < static_cast<std::size_t>(degree))
        throw TooFewSamples("need " + std::to_string(degree) + " samples, got " + std::to_string(sample_count));
    std::vector<std::size_t> idx(static_cast<std::size_t>(degree));
    std::vector<char> used(sample_count, 0);
    double sum = 0.0;
    double count = 0.0;
    // ordered tuples of distinct indices, depth-first
    std::function<void(int)> rec = [&](int depth) {
        if (depth == degree) {
            sum += kernel(idx);
            count += 1.0;
            return;
        }
        for (std::size_t i = 0; i < sample_count; ++i) {
            if (used[i]) continue;
            used[i] = 1;
            idx[static_cast<std::size_t>(depth)] = i;
            rec(depth + 1);
            used[i] = 0;
        }
    };
    rec(0);
    return sum / count;
}

double u_statistic_estimate(const std::function<double(std::span<const double>)>& kernel, int degree,
                            std::span<const double> samples) {
    std::vector<double> args(static_cast<std::size_t>(std::max(degree, 0)));
    return u_statistic_over_indices(samples.size(), degree, [&](std::span<const std::size_t> idx) {
        for (std::size_t j = 0; j < idx.size(); ++j) args[j] = samples[idx[j]];
        return kernel(args);
    });
}

std::string to_string(Combiner c) {
    switch (c) {
        case Combiner::average: return "average";
        case Combiner::extreme: return "extreme";
        case Combiner::mean_variance: return "mean_variance";
        case Combiner::mean_variance_plugin: return "mean_variance_plugin";
        case Combiner::central_u_statistic: return "central_u_statistic";
    }
    return "unknown";
}

Combiner combiner_from_string(const std::string& name) {
    for (auto c : {Combiner::average, Combiner::extreme, Combiner::mean_variance,
                   Combiner::mean_variance_plugin, Combiner::central_u_statistic})
        if (to_string(c) == name) return c;
    throw BadCombiner("unknown combiner '" + name + "'");
}

void check_combiner(const SketchSpec& spec, Combiner c) {
    const auto k = spec.kind;
    bool ok = false;
    switch (c) {
        case Combiner::average: ok = true; break;
        case Combiner::extreme: ok = k == SketchKind::max || k == SketchKind::min; break;
        case Combiner::mean_variance:
        case Combiner::mean_variance_plugin: ok = k == SketchKind::mean_variance; break;
        case Combiner::central_u_statistic:
            ok = k == SketchKind::central_moments || k == SketchKind::mean_variance;
            break;
    }
    if (!ok) throw BadCombiner(to_string(c) + " is not defined for " + spec.name());
}

namespace {

// Unbiased (mean, μ_2..μ_N) of the mixture from k sampled (mean, central) sketches.
// μ_n = Σ_j C(n,j) (-1)^{n-j} M_j M_1^{n-j} with M_j the mixture's raw moments;
// each product of expectations is estimated by a U-statistic over distinct samples.
std::vector<double> central_u_combine(std::span<const std::vector<double>> samples, int N) {
    const std::size_t k = samples.size();
    if (k < static_cast<std::size_t>(N))
        throw TooFewSamples("central_u_statistic needs k >= N = " + std::to_string(N));
    std::vector<MomentSketch> raw;
    for (const auto& s : samples)
        raw.push_back(central_to_moments(s[0], std::span<const double>(s).subspan(1)));
    double mean = 0.0;
    for (const auto& m : raw) mean += m[1];
    mean /= static_cast<double>(k);

    std::vector<double> out{mean};
    for (int n = 2; n <= N; ++n) {
        double acc = 0.0;
        for (int j = 0; j <= n; ++j) {
            const double coef = binomial(n, j) * ((n - j) % 2 == 0 ? 1.0 : -1.0);
            // factors: one M_j (skipped when j = 0) followed by (n - j) copies of M_1
            const int lead = j == 0 ? 0 : 1;
            const int degree = lead + (n - j);
            const double est = u_statistic_over_indices(k, degree, [&](std::span<const std::size_t> idx) {
                double prod = lead ? raw[idx[0]][j] : 1.0;
                for (std::size_t t = static_cast<std::size_t>(lead); t < idx.size(); ++t) prod *= raw[idx[t]][1];
                return prod;
            });
            acc += coef * est;
        }
        out.push_back(acc);
    }
    return out;
}

}  // namespace

std::vector<double> combine_sketches(const SketchSpec& spec, Combiner c,
                                     std::span<const std::vector<double>> samples) {
    check_combiner(spec, c);
    if (samples.empty()) throw EmptyInput("no sampled sketches");
    const std::size_t dim = samples.front().size();
    for (const auto& s : samples)
        if (s.size() != dim) throw MixedDimensions("sampled sketches differ in length");
    const auto k = static_cast<double>(samples.size());

    switch (c) {
        case Combiner::average: {
            std::vector<double> out(dim, 0.0);
            for (const auto& s : samples)
                for (std::size_t i = 0; i < dim; ++i) out[i] += s[i];
            for (auto& x : out) x /= k;
            return out;
        }
        case Combiner::extreme: {
            std::vector<double> out = samples.front();
            const bool is_max = spec.kind == SketchKind::max;
            for (const auto& s : samples)
                for (std::size_t i = 0; i < dim; ++i) out[i] = is_max ? std::max(out[i], s[i]) : std::min(out[i], s[i]);
            return out;
        }
        case Combiner::mean_variance:
        case Combiner::mean_variance_plugin: {
            std::vector<std::pair<double, double>> mv;
            for (const auto& s : samples) mv.emplace_back(s[0], s[1]);
            const auto [m, v] = c == Combiner::mean_variance ? mean_variance_combine(mv)
                                                              : mean_variance_combine_plugin(mv);
            return {m, v};
        }
        case Combiner::central_u_statistic:
            return central_u_combine(samples, static_cast<int>(dim));
    }
    throw BadCombiner("unhandled combiner");
}

// ---- Bellman backups -------------------------------------------------------------------

namespace {

std::vector<double> moment_backup(std::span<const SketchTransition> next, double r, double H_bound) {
    std::vector<std::pair<double, MomentSketch>> parts;
    for (const auto& [p, v] : next) parts.emplace_back(p, denormalize_moments(v, H_bound));
    return normalize_moments(pushforward_moments(mixture_moments(parts), r));
}

}  // namespace

std::vector<double> sketch_bellman_backup(const SketchSpec& spec, std::span<const SketchTransition> next,
                                          double r) {
    spec.validate();
    check_simplex(next);
    for (const auto& [p, v] : next)
        if (v.size() != spec.dimension()) throw MixedDimensions("successor sketch has wrong length");

    switch (spec.kind) {
        case SketchKind::moments: return moment_backup(next, r, spec.H_bound);

        case SketchKind::central_moments:
        case SketchKind::mean_variance: {
            std::vector<SketchTransition> raw_next;
            for (const auto& [p, v] : next) {
                const auto m = central_to_moments(v[0], std::span<const double>(v).subspan(1));
                raw_next.emplace_back(p, normalize_moments(m));
            }
            const auto backed = denormalize_moments(moment_backup(raw_next, r, 1.0), 1.0);
            std::vector<double> out{backed[1]};
            for (double c : moments_to_central(backed)) out.push_back(c);
            return out;
        }

        case SketchKind::max:
        case SketchKind::min: {
            const bool is_max = spec.kind == SketchKind::max;
            double best = is_max ? -std::numeric_limits<double>::infinity()
                                 : std::numeric_limits<double>::infinity();
            for (const auto& [p, v] : next) {
                if (p <= 0.0) continue;
                const double val = r + v[0];
                best = is_max ? std::max(best, val) : std::min(best, val);
            }
            return {best};
        }

        case SketchKind::exp_utility: {
            std::vector<double> logw, expo;
            for (const auto& [p, v] : next) {
                if (p <= 0.0) continue;
                logw.push_back(std::log(p));
                expo.push_back(spec.lambda * (r + v[0]));
            }
            return {log_sum_exp(logw, expo) / spec.lambda};
        }

        case SketchKind::quantile:
        case SketchKind::median:
        case SketchKind::variance:
        case SketchKind::categorical: throw NotBellmanClosed(spec.name());
    }
    throw BadSpec("unhandled sketch kind");
}

std::vector<double> categorical_projected_backup(const SketchSpec& spec,
                                                 std::span<const SketchTransition> next, double r) {
    spec.validate();
    if (spec.kind != SketchKind::categorical) throw BadSpec("categorical_projected_backup needs a categorical spec");
    check_simplex(next);
    std::vector<double> mixed(spec.grid.size(), 0.0);
    for (const auto& [p, v] : next)
        for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += p * v[i];
    std::vector<double> shifted_grid(spec.grid);
    for (auto& x : shifted_grid) x += r;
    return project_to_grid(shifted_grid, mixed, spec.grid);
}

}  // namespace sketchrl
