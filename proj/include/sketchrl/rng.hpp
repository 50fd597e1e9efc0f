#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace sketchrl {

using Rng = std::mt19937_64;

/// Derives an independent stream from a master seed and a list of keys
/// (run, episode, step, ...). std::seed_seq is fully specified by the
/// standard, so streams are identical across platforms.
inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> keys = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * keys.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(master);
    for (auto k : keys) push(k);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// Uniform draw in [0, 1) using the top 53 bits. Avoids the
/// implementation-defined std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw of an index from a probability vector.
inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        acc += probs[i];
        last_positive = i;
        if (u < acc) return i;
    }
    // rounding left u above the accumulated mass
    return last_positive;
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(std::size_t n, Rng& rng) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace sketchrl
