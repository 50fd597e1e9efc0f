#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sketchrl/approx.hpp"
#include "sketchrl/errors.hpp"

namespace sketchrl {

namespace {

// Per pair of members: squared all-output gap and first-output gap at each point.
struct PairTable {
    std::size_t points = 0;
    std::vector<double> sq;     // [pair][point]
    std::vector<double> first;  // [pair][point]
    std::size_t pairs() const { return points == 0 ? 0 : sq.size() / points; }
};

PairTable build_pairs(const EnumeratedFunctionClass& cls) {
    PairTable t;
    t.points = cls.num_keys();
    for (std::size_t i = 0; i < cls.size(); ++i)
        for (std::size_t j = i + 1; j < cls.size(); ++j)
            for (std::size_t z = 0; z < t.points; ++z) {
                double total = 0.0;
                for (int n = 0; n < cls.N; ++n) {
                    const double d = cls.value(i, z, n) - cls.value(j, z, n);
                    total += d * d;
                }
                t.sq.push_back(total);
                t.first.push_back(std::abs(cls.value(i, z, 0) - cls.value(j, z, 0)));
            }
    return t;
}

bool dependent_on(const PairTable& t, std::size_t point, const std::vector<std::size_t>& sequence, double eps) {
    const double eps2 = eps * eps;
    for (std::size_t p = 0; p < t.pairs(); ++p) {
        const double* sq = &t.sq[p * t.points];
        double norm2 = 0.0;
        for (std::size_t z : sequence) norm2 += sq[z];
        if (norm2 <= eps2 && t.first[p * t.points + point] > eps) return false;
    }
    return true;
}

int exact_search(const PairTable& t, double eps) {
    const std::size_t m = t.points;
    const std::size_t masks = std::size_t{1} << m;
    std::vector<int> longest(masks, 0);
    std::vector<std::size_t> members;
    // Supersets have larger indices, so a descending sweep sees them first.
    for (std::size_t mask = masks; mask-- > 0;) {
        members.clear();
        for (std::size_t z = 0; z < m; ++z)
            if (mask & (std::size_t{1} << z)) members.push_back(z);
        int best = 0;
        for (std::size_t z = 0; z < m; ++z) {
            if (mask & (std::size_t{1} << z)) continue;
            if (dependent_on(t, z, members, eps)) continue;
            best = std::max(best, 1 + longest[mask | (std::size_t{1} << z)]);
        }
        longest[mask] = best;
    }
    return longest[0];
}

int greedy_search(const PairTable& t, double eps) {
    int best = 0;
    std::vector<std::size_t> seq;
    for (std::size_t start = 0; start < t.points; ++start) {
        seq.clear();
        if (dependent_on(t, start, seq, eps)) continue;
        seq.push_back(start);
        std::vector<bool> used(t.points, false);
        used[start] = true;
        for (bool grew = true; grew;) {
            grew = false;
            for (std::size_t z = 0; z < t.points; ++z) {
                if (used[z] || dependent_on(t, z, seq, eps)) continue;
                seq.push_back(z);
                used[z] = true;
                grew = true;
                break;
            }
        }
        best = std::max(best, static_cast<int>(seq.size()));
    }
    return best;
}

}  // namespace

bool epsilon_dependent(const Point& point, const std::vector<Point>& sequence,
                       const EnumeratedFunctionClass& cls, double eps) {
    if (!(eps > 0.0)) throw BadParams("eps must be positive");
    cls.validate();
    auto key = [&](const Point& p) {
        if (p.h < 0 || p.h >= cls.H || p.s < 0 || p.s >= cls.S || p.a < 0 || p.a >= cls.A)
            throw IndexOutOfRange("point outside the class domain");
        return cls.key(p.h, p.s, p.a);
    };
    const PairTable t = build_pairs(cls);
    std::vector<std::size_t> seq;
    seq.reserve(sequence.size());
    for (const auto& p : sequence) seq.push_back(key(p));
    return dependent_on(t, key(point), seq, eps);
}

int eluder_dimension(const EnumeratedFunctionClass& cls, double eps, EluderMode mode,
                     const std::vector<double>& eps_sweep) {
    if (!(eps > 0.0)) throw BadParams("eps must be positive");
    cls.validate();
    if (mode == EluderMode::exact && cls.num_keys() > kMaxExactEluderPoints)
        throw InstanceTooLarge("exact eluder search needs at most " + std::to_string(kMaxExactEluderPoints) +
                               " points, got " + std::to_string(cls.num_keys()));
    const PairTable t = build_pairs(cls);
    std::vector<double> levels{eps};
    for (double e : eps_sweep)
        if (e >= eps) levels.push_back(e);
    int best = 0;
    for (double e : levels)
        best = std::max(best, mode == EluderMode::exact ? exact_search(t, e) : greedy_search(t, e));
    return best;
}

}  // namespace sketchrl
