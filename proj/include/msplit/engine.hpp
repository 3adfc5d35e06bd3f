#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "msplit/chain.hpp"
#include "msplit/plan.hpp"

namespace msplit {

// Arrival table for one step: arrivals[i][j] counts the particles landing
// on subset j whose parent sat on subset i of the previous frontier; z is
// the column sum, the live population per subset after the step.
struct LevelDraw {
    std::vector<std::vector<std::int64_t>> arrivals;
    std::vector<std::int64_t> z;
};

// Full record of one branching run: one LevelDraw per step 1..M+1, the
// last of which has a single subset (the target).
struct RunTrace {
    std::vector<LevelDraw> levels;

    std::int64_t hits() const { return levels.back().z[0]; }
};

struct EstimateSummary {
    std::int64_t n_rep = 0;
    double mean = 0.0;
    double sample_variance = 0.0;
    double standard_error = 0.0;
    double extinction_rate = 0.0;  // fraction of runs with no hit at all
};

// One branching run: survivors of each step are duplicated per the plan
// and pushed through the next kernel; survival is binomial per origin and
// the landing subset multinomial on the normalized row.
RunTrace run_replication(const KernelChain& chain, const Plan& plan, std::mt19937_64& rng);
RunTrace run_replication(const ChainSpec& spec, const Plan& plan, std::mt19937_64& rng);

// Estimate carried by one run: hits over the cumulative replication count.
double estimate(const RunTrace& trace, const Plan& plan);

// n_rep independent runs, replication j drawn from substream (seed, j).
// The threaded driver and the serial reference produce bit-identical
// summaries because streams are keyed by index, and per-run results are
// merged in index order regardless of scheduling.
EstimateSummary replicate(const ChainSpec& spec, const Plan& plan, std::int64_t n_rep,
                          std::uint64_t seed, int threads = 0);
EstimateSummary replicate_serial(const ChainSpec& spec, const Plan& plan, std::int64_t n_rep,
                                 std::uint64_t seed);

// Per-run estimates in index order; shared by both drivers and reused by
// tests that inspect the raw distribution.
std::vector<double> replicate_values(const ChainSpec& spec, const Plan& plan, std::int64_t n_rep,
                                     std::uint64_t seed, int threads);

EstimateSummary summarize(const std::vector<double>& phat);

}  // namespace msplit
