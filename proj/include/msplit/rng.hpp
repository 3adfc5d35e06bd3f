#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace msplit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Substream derivation: the master seed and every index are folded
// through SplitMix64, so the generator for (seed, i, j, ...) is a pure
// function of its key. Giving each replication (and each particle) its
// own stream keyed by its index makes every draw independent of
// execution order, which is what lets the threaded and serial drivers
// produce bit-identical results.
inline std::uint64_t substream_key(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Ids>
std::uint64_t substream_key(std::uint64_t seed, std::uint64_t id, Ids... rest) {
    return substream_key(splitmix64(seed ^ (id + 0x9e3779b97f4a7c15ULL)), rest...);
}

template <typename... Ids>
std::mt19937_64 substream(std::uint64_t seed, Ids... ids) {
    return std::mt19937_64(substream_key(seed, std::uint64_t(ids)...));
}

inline std::int64_t draw_binomial(std::mt19937_64& rng, std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<std::int64_t> d(n, p);
    return d(rng);
}

// Multinomial draw as a chain of conditional binomials. The categories
// may sum to less than one; leftover trials are dropped.
inline std::vector<std::int64_t> draw_multinomial(std::mt19937_64& rng, std::int64_t n,
                                                  const std::vector<double>& probs) {
    std::vector<std::int64_t> out(probs.size(), 0);
    double tail = 1.0;
    std::int64_t left = n;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (left <= 0) break;
        if (j + 1 == probs.size() && tail <= probs[j] * (1.0 + 1e-12)) {
            out[j] = left;  // final category absorbs rounding in the tail mass
            break;
        }
        double q = tail > 0.0 ? std::clamp(probs[j] / tail, 0.0, 1.0) : 0.0;
        out[j] = draw_binomial(rng, left, q);
        left -= out[j];
        tail -= probs[j];
    }
    return out;
}

}  // namespace msplit
