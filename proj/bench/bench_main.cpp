// Timing comparison between the serial reference drivers and the
// OpenMP-parallel ones, on the two hot paths: batched replication of the
// branching estimator and the staged diffusion pipeline's particle waves.
// Results must match bit for bit regardless of the thread count; the
// benchmark checks that while it measures.

#include <chrono>
#include <cstdio>
#include <string>

#include "msplit/chain.hpp"
#include "msplit/engine.hpp"
#include "msplit/plan.hpp"
#include "msplit/sde.hpp"
#include "msplit/variance.hpp"

using namespace msplit;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ChainSpec bench_chain() {
    ChainSpec spec;
    spec.M = 3;
    spec.gamma1 = Measure({0.15, 0.2, 0.1});
    SubKernel P2(3, 3), P3(3, 3);
    const double p2[9] = {0.2, 0.1, 0.1, 0.1, 0.25, 0.1, 0.05, 0.15, 0.2};
    const double p3[9] = {0.15, 0.2, 0.05, 0.1, 0.2, 0.1, 0.2, 0.1, 0.1};
    for (int i = 0; i < 9; ++i) {
        P2.a[std::size_t(i)] = p2[i];
        P3.a[std::size_t(i)] = p3[i];
    }
    spec.kernels = {P2, P3};
    spec.fM = LevelFn({0.3, 0.2, 0.25});
    spec.validate();
    return spec;
}

}  // namespace

int main() {
    const ChainSpec spec = bench_chain();
    Plan plan;
    plan.N = 200;
    plan.R = {3, 3, 2};
    const std::int64_t n_rep = 20000;
    const std::uint64_t seed = 12345;

    std::printf("branching estimator: %lld replications, N = %lld, p = %.3e\n",
                (long long)n_rep, (long long)plan.N, chain_probability(spec));

    auto t0 = std::chrono::steady_clock::now();
    const EstimateSummary ref = replicate_serial(spec, plan, n_rep, seed);
    const double serial_s = seconds_since(t0);
    std::printf("  %-18s %8.3fs   mean %.6e\n", "serial reference", serial_s, ref.mean);

    for (int threads : {1, 2, 4}) {
        t0 = std::chrono::steady_clock::now();
        const EstimateSummary par = replicate(spec, plan, n_rep, seed, threads);
        const double par_s = seconds_since(t0);
        const bool same = par.mean == ref.mean && par.sample_variance == ref.sample_variance &&
                          par.extinction_rate == ref.extinction_rate;
        std::printf("  %-18s %8.3fs   speedup %.2fx   %s\n",
                    (std::to_string(threads) + " thread(s)").c_str(), par_s,
                    serial_s / par_s, same ? "bitwise identical" : "MISMATCH");
        if (!same) return 1;
    }

    OUConfig cfg;  // reference diffusion parameters
    cfg.seed = 7;
    const std::array<double, 3> radii{0.5, 1.0, 1.5};
    std::printf("staged diffusion waves: N = 1200, duplication 2/2, no deformation\n");

    double first_phat = 0.0;
    double one_thread_s = 0.0;
    for (int threads : {1, 2, 4}) {
        PipelineOptions opt;
        opt.deform = false;
        opt.threads = threads;
        t0 = std::chrono::steady_clock::now();
        const StagedReport rep = run_ou_pipeline(cfg, radii, 1200, {2, 2}, opt);
        const double s = seconds_since(t0);
        if (threads == 1) {
            first_phat = rep.p_hat;
            one_thread_s = s;
        }
        const bool same = rep.p_hat == first_phat;
        std::printf("  %-18s %8.3fs   speedup %.2fx   %s\n",
                    (std::to_string(threads) + " thread(s)").c_str(), s, one_thread_s / s,
                    same ? "bitwise identical" : "MISMATCH");
        if (!same) return 1;
    }
    return 0;
}
