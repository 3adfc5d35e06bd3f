#pragma once

// Shared test utilities: random chain generation and slow, independent
// re-derivations used as oracles against the library implementations.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <functional>

#include "msplit/chain.hpp"
#include "msplit/plan.hpp"
#include "msplit/types.hpp"

namespace testutil {

using msplit::ChainSpec;
using msplit::LevelFn;
using msplit::Measure;
using msplit::SubKernel;

inline bool close(double a, double b, double rel, double abs_floor = 1e-14) {
    double d = std::abs(a - b);
    return d <= abs_floor || d <= rel * std::max(std::abs(a), std::abs(b));
}

// Random chain with entries bounded away from zero so that normalized
// quantities stay well conditioned. Row masses land in [lo_mass, hi_mass].
inline ChainSpec random_spec(std::mt19937_64& rng, int max_M, int max_s,
                             double lo_mass = 0.3, double hi_mass = 0.95) {
    std::uniform_int_distribution<int> pick_M(1, max_M);
    std::uniform_int_distribution<int> pick_s(1, max_s);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    std::uniform_real_distribution<double> mass(lo_mass, hi_mass);

    ChainSpec spec;
    spec.M = pick_M(rng);
    std::vector<int> sizes(std::size_t(spec.M) + 1);
    for (int k = 1; k <= spec.M; ++k) sizes[std::size_t(k)] = pick_s(rng);

    auto fill_row = [&](double* row, int n) {
        double tot = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = unif(rng);
            tot += row[j];
        }
        double scale = mass(rng) / tot;
        for (int j = 0; j < n; ++j) row[j] *= scale;
    };

    spec.gamma1.w.resize(std::size_t(sizes[1]));
    fill_row(spec.gamma1.w.data(), sizes[1]);
    for (int k = 2; k <= spec.M; ++k) {
        SubKernel P(std::size_t(sizes[std::size_t(k - 1)]), std::size_t(sizes[std::size_t(k)]));
        for (std::size_t i = 0; i < P.rows; ++i) fill_row(&P.a[i * P.cols], int(P.cols));
        spec.kernels.push_back(std::move(P));
    }
    spec.fM.v.resize(std::size_t(sizes[std::size_t(spec.M)]));
    std::uniform_real_distribution<double> fm(0.05, 0.95);
    for (double& x : spec.fM.v) x = fm(rng);
    return spec;
}

// Plain-loop matrix action, kept deliberately naive.
inline std::vector<double> naive_apply(const SubKernel& P, const std::vector<double>& f) {
    std::vector<double> out(P.rows, 0.0);
    for (std::size_t i = 0; i < P.rows; ++i)
        for (std::size_t j = 0; j < P.cols; ++j) out[i] += P(i, j) * f[j];
    return out;
}

inline std::vector<double> naive_push(const std::vector<double>& g, const SubKernel& P) {
    std::vector<double> out(P.cols, 0.0);
    for (std::size_t i = 0; i < P.rows; ++i)
        for (std::size_t j = 0; j < P.cols; ++j) out[j] += g[i] * P(i, j);
    return out;
}

// Reach probability by brute-force enumeration of every surviving path.
inline double enumerate_paths(const ChainSpec& spec) {
    std::vector<double> weight = spec.gamma1.w;
    for (const SubKernel& P : spec.kernels) weight = naive_push(weight, P);
    double p = 0.0;
    for (std::size_t i = 0; i < weight.size(); ++i) p += weight[i] * spec.fM[i];
    return p;
}

inline double binom(int n, int k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
    return c;
}

inline double binom_pmf(int n, int k, double q) {
    return binom(n, k) * std::pow(q, k) * std::pow(1.0 - q, n - k);
}

// Enumerate every split of `trials` particles over the given categories
// (any leftover mass kills the particle), emitting counts and their exact
// multinomial probability as a chain of conditional binomial factors.
inline void enum_split(int trials, const std::vector<double>& probs,
                       const std::function<void(const std::vector<int>&, double)>& emit) {
    std::size_t s = probs.size();
    std::vector<int> counts(s, 0);
    std::function<void(std::size_t, int, double, double)> rec =
        [&](std::size_t j, int left, double tail, double prob) {
            if (j == s) {
                emit(counts, prob);
                return;
            }
            double q = tail > 0.0 ? std::min(1.0, std::max(0.0, probs[j] / tail)) : 0.0;
            for (int k = 0; k <= left; ++k) {
                double f = binom_pmf(left, k, q);
                if (f <= 0.0 && k > 0) continue;
                counts[j] = k;
                rec(j + 1, left - k, tail - probs[j], prob * f);
            }
            counts[j] = 0;
        };
    rec(0, trials, 1.0, 1.0);
}

struct ExactMoments {
    double mean = 0.0;
    double second = 0.0;
    double variance() const { return second - mean * mean; }
};

// Exact distribution of the splitting estimator by full enumeration of
// the branching tree. Only feasible for very small chains and plans; the
// point is total independence from the sampling code.
inline ExactMoments enumerate_estimator(const ChainSpec& spec, const msplit::Plan& plan) {
    msplit::KernelChain ch(spec);
    const int M = spec.M;
    auto r = plan.counts(M);
    const double rM = double(r[std::size_t(M)]);

    ExactMoments out;
    std::function<void(int, const std::vector<int>&, double)> advance =
        [&](int n, const std::vector<int>& z, double prob) {
            if (n == M + 2) {
                double ph = double(z[0]) / rM;
                out.mean += prob * ph;
                out.second += prob * ph * ph;
                return;
            }
            const SubKernel& P = ch.kernel(n);
            std::int64_t mult = (n == 1) ? 1 : plan.R[std::size_t(n - 2)];
            std::vector<int> acc(P.cols, 0);
            std::function<void(std::size_t, double)> per_origin = [&](std::size_t i, double pr) {
                if (i == P.rows) {
                    advance(n + 1, acc, pr);
                    return;
                }
                int trials = int(mult * z[i]);
                std::vector<double> row(P.cols);
                for (std::size_t j = 0; j < P.cols; ++j) row[j] = P(i, j);
                enum_split(trials, row, [&](const std::vector<int>& k, double f) {
                    for (std::size_t j = 0; j < P.cols; ++j) acc[j] += k[j];
                    per_origin(i + 1, pr * f);
                    for (std::size_t j = 0; j < P.cols; ++j) acc[j] -= k[j];
                });
            };
            per_origin(0, prob);
        };
    advance(1, std::vector<int>{int(plan.N)}, 1.0);
    return out;
}

inline double point_to_segment(std::pair<double, double> p, std::pair<double, double> a,
                               std::pair<double, double> b) {
    const double vx = b.first - a.first;
    const double vy = b.second - a.second;
    const double wx = p.first - a.first;
    const double wy = p.second - a.second;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    return std::hypot(wx - t * vx, wy - t * vy);
}

// Hausdorff distance between two closed polylines, measuring each vertex
// against the other curve's segments rather than its vertex set.
inline double polyline_hausdorff(const std::vector<std::pair<double, double>>& a,
                                 const std::vector<std::pair<double, double>>& b) {
    auto directed = [](const std::vector<std::pair<double, double>>& from,
                       const std::vector<std::pair<double, double>>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = 1e300;
            for (std::size_t i = 0; i < to.size(); ++i)
                best = std::min(best, point_to_segment(p, to[i], to[(i + 1) % to.size()]));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

}  // namespace testutil
