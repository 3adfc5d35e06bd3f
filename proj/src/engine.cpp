#include "msplit/engine.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "msplit/rng.hpp"

namespace msplit {

RunTrace run_replication(const KernelChain& chain, const Plan& plan, std::mt19937_64& rng) {
    const int M = chain.M();
    plan.validate(M);

    RunTrace trace;
    trace.levels.resize(std::size_t(M) + 2);

    std::vector<std::int64_t> prev{plan.N};
    for (int n = 1; n <= M + 1; ++n) {
        const SubKernel& P = chain.kernel(n);
        const LevelFn& g = chain.g(n - 1);
        std::int64_t mult = (n == 1) ? 1 : plan.R[std::size_t(n - 2)];

        LevelDraw draw;
        draw.arrivals.assign(P.rows, {});
        draw.z.assign(P.cols, 0);
        for (std::size_t i = 0; i < P.rows; ++i) {
            std::int64_t trials = mult * prev[i];
            if (trials == 0) continue;
            if (g[i] <= 0.0) continue;  // dead row: nothing to draw from
            std::int64_t survivors = draw_binomial(rng, trials, g[i]);
            if (survivors == 0) continue;
            std::vector<double> row(P.cols);
            for (std::size_t j = 0; j < P.cols; ++j) row[j] = P(i, j) / g[i];
            draw.arrivals[i] = draw_multinomial(rng, survivors, row);
            for (std::size_t j = 0; j < P.cols; ++j) draw.z[j] += draw.arrivals[i][j];
        }
        prev = draw.z;
        trace.levels[std::size_t(n)] = std::move(draw);
    }
    return trace;
}

RunTrace run_replication(const ChainSpec& spec, const Plan& plan, std::mt19937_64& rng) {
    KernelChain ch(spec);
    return run_replication(ch, plan, rng);
}

double estimate(const RunTrace& trace, const Plan& plan) {
    int M = int(trace.levels.size()) - 2;
    return double(trace.hits()) / double(plan.counts(M).back());
}

std::vector<double> replicate_values(const ChainSpec& spec, const Plan& plan, std::int64_t n_rep,
                                     std::uint64_t seed, int threads) {
    require(n_rep >= 1, "replicate: n_rep must be >= 1");
    KernelChain chain(spec);
    const double rM = double(plan.counts(spec.M).back());
    std::vector<double> phat(std::size_t(n_rep), 0.0);

#ifdef _OPENMP
    int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t j = 0; j < n_rep; ++j) {
        std::mt19937_64 rng = substream(seed, std::uint64_t(j));
        RunTrace t = run_replication(chain, plan, rng);
        phat[std::size_t(j)] = double(t.hits()) / rM;
    }
#else
    (void)threads;
    for (std::int64_t j = 0; j < n_rep; ++j) {
        std::mt19937_64 rng = substream(seed, std::uint64_t(j));
        RunTrace t = run_replication(chain, plan, rng);
        phat[std::size_t(j)] = double(t.hits()) / rM;
    }
#endif
    return phat;
}

EstimateSummary summarize(const std::vector<double>& phat) {
    EstimateSummary s;
    s.n_rep = std::int64_t(phat.size());
    Accum mean;
    std::int64_t extinct = 0;
    for (double x : phat) {
        mean.add(x);
        if (x == 0.0) ++extinct;
    }
    s.mean = mean.value() / double(s.n_rep);
    Accum ss;
    for (double x : phat) {
        double d = x - s.mean;
        ss.add(d * d);
    }
    s.sample_variance = s.n_rep > 1 ? ss.value() / double(s.n_rep - 1) : 0.0;
    s.standard_error = std::sqrt(s.sample_variance / double(s.n_rep));
    s.extinction_rate = double(extinct) / double(s.n_rep);
    return s;
}

EstimateSummary replicate(const ChainSpec& spec, const Plan& plan, std::int64_t n_rep,
                          std::uint64_t seed, int threads) {
    return summarize(replicate_values(spec, plan, n_rep, seed, threads));
}

EstimateSummary replicate_serial(const ChainSpec& spec, const Plan& plan, std::int64_t n_rep,
                                 std::uint64_t seed) {
    require(n_rep >= 1, "replicate: n_rep must be >= 1");
    KernelChain chain(spec);
    const double rM = double(plan.counts(spec.M).back());
    std::vector<double> phat(std::size_t(n_rep), 0.0);
    for (std::int64_t j = 0; j < n_rep; ++j) {
        std::mt19937_64 rng = substream(seed, std::uint64_t(j));
        RunTrace t = run_replication(chain, plan, rng);
        phat[std::size_t(j)] = double(t.hits()) / rM;
    }
    return summarize(phat);
}

}  // namespace msplit
