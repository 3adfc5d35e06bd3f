// Acceptance gate: one line per criterion, [PASS] or [FAIL], with the
// pinned tolerance and the measured quantity on the same line. The
// process exits with the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "msplit/advisor.hpp"
#include "msplit/chain.hpp"
#include "msplit/conformal.hpp"
#include "msplit/engine.hpp"
#include "msplit/plan.hpp"
#include "msplit/rng.hpp"
#include "msplit/sde.hpp"
#include "msplit/stats.hpp"
#include "msplit/variance.hpp"

using namespace msplit;
using cplx = std::complex<double>;

namespace {

const double kTwoPi = 2.0 * std::acos(-1.0);

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    std::printf("[%s] %2d. %s (%.2fs)%s%s\n", o.pass ? "PASS" : "FAIL", id, title, dt.count(),
                o.detail.empty() ? "" : " -- ", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++g_failures;
}

std::string fmt(const char* pattern, ...) {
    char buf[256];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

double rel(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m > 0.0 ? std::abs(a - b) / m : 0.0;
}

Plan random_plan(std::mt19937_64& rng, int M) {
    Plan plan;
    plan.N = std::uniform_int_distribution<std::int64_t>(50, 400)(rng);
    for (int k = 0; k < M; ++k)
        plan.R.push_back(std::uniform_int_distribution<std::int64_t>(2, 4)(rng));
    return plan;
}

// ---- criterion 9 fixtures -------------------------------------------------

cplx quad_map(cplx z) { return z + 0.2 * z * z; }
double quad_speed(double theta) { return std::abs(cplx(1.0, 0.0) + 0.4 * std::polar(1.0, theta)); }

double quad_perimeter() {
    const int n = 1 << 16;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += quad_speed(kTwoPi * i / n) * (kTwoPi / n);
    return total;
}

// ---- criteria -------------------------------------------------------------

Outcome c1_worked_example() {
    ChainSpec spec;
    spec.M = 1;
    spec.gamma1 = Measure({0.01, 0.5});
    spec.fM = LevelFn({0.1, 0.001});
    spec.validate();
    const double p = chain_probability(spec);
    const double mass = spec.gamma1.total();
    Outcome o;
    o.pass = (p == 0.0015) && (mass == 0.51);
    o.detail = fmt("p = %.17g, entry mass = %.17g (exact equality)", p, mass);
    return o;
}

Outcome c2_duplication_endpoints() {
    const InsertionAdvice at0 = simplified_cost_optimum(0.0);
    const InsertionAdvice at9 = simplified_cost_optimum(1.0 / 9.0);
    const double r0 = 2.0 * (1.0 + std::sqrt(2.0));
    const double e1 = std::abs(at0.R_star - r0);
    const double e2 = std::abs(at9.R_star - 3.0);
    const double e3 = std::abs(at0.g_star - 0.5);
    const double e4 = std::abs(at9.g_star - 1.0 / 3.0);
    Outcome o;
    // At exactly 1/9 the variance gain degenerates to zero, so the advice
    // flag is off there; only the limiting values are pinned.
    o.pass = at0.worthwhile && e1 <= 1e-12 && e2 <= 1e-12 && e3 <= 1e-12 && e4 <= 1e-12;
    o.detail = fmt("|R*(0) - 2(1+sqrt2)| = %.2e, |R*(1/9) - 3| = %.2e (tol 1e-12)", e1, e2);
    return o;
}

Outcome c3_variance_agreement() {
    std::mt19937_64 rng(90003);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ChainSpec spec = testutil::random_spec(rng, 4, 4);
        const Plan plan = random_plan(rng, spec.M);
        const double forms[4] = {variance_two_part(spec, plan).total,
                                 variance_gamma_form(spec, plan, GammaForm::telescoping),
                                 variance_gamma_form(spec, plan, GammaForm::second_moment),
                                 variance_sigma_oracle(spec, plan)};
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b) worst = std::max(worst, rel(forms[a], forms[b]));
    }
    Outcome o;
    o.pass = worst <= 1e-10;
    o.detail = fmt("worst pairwise relative gap = %.3e over 1000 chains (tol 1e-10)", worst);
    return o;
}

Outcome c4_exhaustive_enumeration() {
    ChainSpec spec;
    spec.M = 1;
    spec.gamma1 = Measure({0.3, 0.4});
    spec.fM = LevelFn({0.5, 0.25});
    spec.validate();
    Plan plan;
    plan.N = 2;
    plan.R = {2};

    const testutil::ExactMoments exact = testutil::enumerate_estimator(spec, plan);
    const double forms[4] = {variance_two_part(spec, plan).total,
                             variance_gamma_form(spec, plan, GammaForm::telescoping),
                             variance_gamma_form(spec, plan, GammaForm::second_moment),
                             variance_sigma_oracle(spec, plan)};
    double worst = 0.0;
    for (double f : forms) worst = std::max(worst, rel(f, exact.variance()));
    const double mean_gap = rel(exact.mean, chain_probability(spec));
    Outcome o;
    o.pass = worst <= 1e-12 && mean_gap <= 1e-12;
    o.detail = fmt("exact Var = %.12e, worst form gap = %.3e (tol 1e-12)", exact.variance(),
                   worst);
    return o;
}

Outcome c5_unbiasedness() {
    ChainSpec spec;
    spec.M = 2;
    spec.gamma1 = Measure({0.2});
    SubKernel P(1, 1);
    P(0, 0) = 0.25;
    spec.kernels.push_back(P);
    spec.fM = LevelFn({0.2});
    spec.validate();
    Plan plan;
    plan.N = 200;
    plan.R = {2, 3};

    const double p = chain_probability(spec);
    const double v = variance_two_part(spec, plan).total;
    const std::int64_t n = 100000;
    const EstimateSummary sum = replicate(spec, plan, n, 424242);

    const double se = std::sqrt(v / double(n));
    const double mean_dev = std::abs(sum.mean - p) / se;
    // Normal-theory 99% band for the sample variance around its target.
    const double half = 2.5758 * std::sqrt(2.0 / double(n - 1));
    const double var_dev = std::abs(sum.sample_variance - v) / v;
    Outcome o;
    o.pass = mean_dev <= 3.0 && var_dev <= half;
    o.detail = fmt("p = %.4g, |mean - p| = %.2f SE (<= 3), |s2/Var - 1| = %.4f (<= %.4f)", p,
                   mean_dev, var_dev, half);
    return o;
}

Outcome c6_identity_suite() {
    std::mt19937_64 rng(90006);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const ChainSpec spec = testutil::random_spec(rng, 4, 4);
        const KernelChain ch(spec);

        // Iterate recursion vs closed form: the call itself refuses any
        // mismatch between its two internal routes.
        for (int k = 0; k <= spec.M + 1; ++k)
            for (int n = 0; n <= k; ++n) (void)gamma_op_iter(ch, k, n, ch.f(k));

        for (int k = 0; k <= spec.M; ++k) {
            const SubKernel& P = ch.kernel(k + 1);

            // Telescoping: gamma_k(Gamma(f)) = gamma_{k+1}(f^2) - gamma_k(f^2).
            const LevelFn G = gamma_op(P, ch.f(k + 1));
            auto sq = [&](int lvl) {
                LevelFn h(ch.size(lvl), 0.0);
                for (std::size_t j = 0; j < h.size(); ++j) h[j] = ch.f(lvl)[j] * ch.f(lvl)[j];
                return value(ch.gamma(lvl), h);
            };
            worst = std::max(worst, rel(value(ch.gamma(k), G), sq(k + 1) - sq(k)));

            // Gamma(1) = g (1 - g).
            const LevelFn ones(ch.size(k + 1), 1.0);
            const LevelFn g1 = gamma_op(P, ones);
            const LevelFn g = ch.g(k);
            for (std::size_t i = 0; i < g1.size(); ++i) {
                const double want = g[i] * (1.0 - g[i]);
                if (std::abs(g1[i] - want) > 1e-15)
                    worst = std::max(worst, rel(g1[i], want));
            }

            // Bilinearity in the first slot.
            std::uniform_real_distribution<double> coef(-2.0, 2.0);
            LevelFn f(ch.size(k + 1), 0.0), h(ch.size(k + 1), 0.0), w(ch.size(k + 1), 0.0);
            for (std::size_t i = 0; i < f.size(); ++i) {
                f[i] = coef(rng);
                h[i] = coef(rng);
                w[i] = coef(rng);
            }
            const double a = coef(rng), b = coef(rng);
            LevelFn combo(ch.size(k + 1), 0.0);
            for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * f[i] + b * h[i];
            const LevelFn left = gamma_op(P, combo, w);
            const LevelFn first = gamma_op(P, f, w);
            const LevelFn second = gamma_op(P, h, w);
            for (std::size_t i = 0; i < left.size(); ++i) {
                const double want = a * first[i] + b * second[i];
                if (std::abs(left[i] - want) > 1e-13)
                    worst = std::max(worst, rel(left[i], want));
            }
        }

        // Binomial inversion of second moments over iterated operators.
        for (int k = 0; k <= spec.M + 1; ++k) {
            LevelFn h(ch.size(k), 0.0);
            for (std::size_t j = 0; j < h.size(); ++j) h[j] = ch.f(k)[j] * ch.f(k)[j];
            const double lhs = value(ch.gamma(k), h);
            double rhs = 0.0;
            for (int j = 0; j <= k; ++j)
                rhs += testutil::binom(k, j) * gamma_op_iter(ch, j, j, ch.f(j))[0];
            worst = std::max(worst, rel(lhs, rhs));
        }
    }
    Outcome o;
    o.pass = worst <= 1e-10;
    o.detail = fmt("worst identity residual = %.3e over 500 chains (tol 1e-10)", worst);
    return o;
}

Outcome c7_deletion_advice() {
    std::mt19937_64 rng(90007);
    double worst_cost = 0.0;
    int mismatches = 0;
    int verdicts = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::uniform_real_distribution<double> unif(0.05, 0.95);
        const double g_prev = unif(rng);
        double g_k = unif(rng);
        if (std::abs(g_k - g_prev) < 1e-6) g_k = 0.5 * g_prev + 1e-3;
        const double f = unif(rng);
        const double a_k = unif(rng);
        const std::int64_t R = std::uniform_int_distribution<std::int64_t>(2, 5)(rng);

        ChainSpec spec;
        spec.M = 2;
        spec.gamma1 = Measure({g_prev});
        SubKernel P(1, 1);
        P(0, 0) = g_k;
        spec.kernels.push_back(P);
        spec.fM = LevelFn({f});
        Plan plan;
        plan.N = 400;
        plan.R = {R, 2};

        // Cost model billing a_k on the entry step and 1 - a_k on the
        // dropped one, so the merged double step costs exactly one.
        CostModel model;
        model.name = "split";
        model.c = [g_prev, g_k, a_k](double x) {
            if (std::abs(x - g_prev) < 1e-12) return a_k;
            if (std::abs(x - g_k) < 1e-12) return 1.0 - a_k;
            return 1.0;
        };
        const LevelFn merged({1.0});

        const std::vector<double> lambdas =
            cost_preserving_lambdas(spec, plan, 1, model, merged);
        const DeletionSplit split = deletion_split(spec, plan, 1, lambdas, model, merged);
        worst_cost = std::max(worst_cost, rel(split.cost_without, split.cost_total));

        const DeletionReport rep = advise_deletion(g_prev, g_k, double(R), a_k);
        if (std::abs(split.corrective) > 1e-13 * split.variance_total) {
            ++verdicts;
            if (rep.drop != (split.corrective > 0.0)) ++mismatches;
        }
    }
    Outcome o;
    o.pass = mismatches == 0 && worst_cost <= 1e-12 && verdicts >= 900;
    o.detail = fmt("%d/%d verdicts matched, worst cost drift = %.3e (tol 1e-12)",
                   verdicts - mismatches, verdicts, worst_cost);
    return o;
}

Outcome c8_reweighting() {
    std::mt19937_64 rng(90008);
    double worst_comp = 0.0, worst_row = 0.0, worst_cost = 0.0;
    int verified = 0;
    for (int trial = 0; trial < 3000 && verified < 500; ++trial) {
        const ChainSpec spec = testutil::random_spec(rng, 4, 3);
        const int k = std::uniform_int_distribution<int>(1, spec.M)(rng);
        const Plan plan = random_plan(rng, spec.M);
        const CostModel model = (trial % 2 == 0) ? unit_cost() : reciprocal_cost();
        const double ct_prev = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
        const double ct_k = std::uniform_real_distribution<double>(0.5, 2.0)(rng);

        const double K = optimal_K(spec, plan, k, model, ct_prev, ct_k);
        if (!(K > 0.0) || !std::isfinite(K)) continue;
        PerturbedLevel pl;
        try {
            pl = perturb_threshold(spec, k, K);
        } catch (const std::runtime_error&) {
            continue;  // factor outside the admissible band for this draw
        }
        ++verified;

        const KernelChain chain(spec);
        const SubKernel& A = chain.kernel(k);
        const SubKernel& B = chain.kernel(k + 1);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t l = 0; l < B.cols; ++l) {
                double orig = 0.0, mod = 0.0;
                for (std::size_t j = 0; j < A.cols; ++j) {
                    orig += A(i, j) * B(j, l);
                    mod += pl.Pk_tilde(i, j) * pl.Pk1_tilde(j, l);
                }
                worst_comp = std::max(worst_comp,
                                      std::abs(mod - orig) / (std::abs(orig) + 1e-30));
            }
        for (double s : pl.Pk1_tilde.row_sums().v)
            worst_row = std::max(worst_row, std::abs(s - 1.0 / K));
        if (pl.g_k_tilde != 1.0 / K) worst_row = std::max(worst_row, 1.0);

        const double before = cost(spec, plan, model).total;
        const double after = perturbed_cost(pl, plan, model, ct_prev, ct_k);
        worst_cost = std::max(worst_cost, rel(after, before));
    }
    Outcome o;
    o.pass = verified >= 500 && worst_comp <= 1e-13 && worst_row <= 1e-12 &&
             worst_cost <= 1e-10;
    o.detail = fmt("%d chains: composite drift %.2e (1e-13), survival drift %.2e (1e-12), "
                   "cost drift %.2e (1e-10)",
                   verified, worst_comp, worst_row, worst_cost);
    return o;
}

Outcome c9_conformal_round_trip() {
    // Quadratic boundary recovered from its own hit density.
    const double P = quad_perimeter();
    BoundaryDensity qd;
    qd.radius = 1.0;
    qd.h = [P](double theta) { return quad_speed(theta) / P; };
    const ConformalMap qm(qd, 1024, P);
    const BoundaryImage img = boundary_image(qm, 512);
    std::vector<std::pair<double, double>> truth;
    for (int i = 0; i < 4096; ++i) {
        const cplx w = quad_map(std::polar(1.0, kTwoPi * i / 4096));
        truth.push_back({w.real(), w.imag()});
    }
    const double haus = testutil::polyline_hausdorff(img.points, truth);
    const double quad_perim_err = rel(img.perimeter, P);

    // Uniform density must reproduce the circle rigidly.
    BoundaryDensity ud;
    ud.radius = 1.0;
    ud.h = [](double) { return 1.0 / kTwoPi; };
    const ConformalMap um(ud, 1024);
    double circle_dev = 0.0;
    for (int i = 0; i < 512; ++i) {
        const double theta = kTwoPi * i / 512;
        circle_dev = std::max(circle_dev,
                              std::abs(um.boundary_point(theta) - std::polar(1.0, theta)));
    }

    // Perimeter convention: images keep the length of their source circle.
    BoundaryDensity half = ud;
    half.radius = 0.5;
    const double half_perim = boundary_image(ConformalMap(half, 1024), 512).perimeter;
    const double half_err = rel(half_perim, kTwoPi * 0.5);

    Outcome o;
    o.pass = haus < 1e-3 && circle_dev < 1e-6 && half_err <= 1e-4 && quad_perim_err <= 1e-4;
    o.detail = fmt("Hausdorff %.2e (1e-3), circle dev %.2e (1e-6), perimeter rel errs "
                   "%.2e / %.2e (1e-4)",
                   haus, circle_dev, half_err, quad_perim_err);
    return o;
}

Outcome c10_annulus_exit() {
    OUConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    cfg.sigma = 0.3;
    cfg.dt = 4e-5;
    cfg.kill_radius = 0.01;
    cfg.x0 = {0.25, 0.0};
    cfg.validate();
    const Boundary outer = Boundary::circle(0.5);

    const int n = 10000;
    int hits = 0;
    for (int j = 0; j < n; ++j) {
        std::mt19937_64 rng = substream(777, std::uint64_t(j));
        const HitRecord r = simulate_first_hit_from(cfg, outer, cfg.x0, rng);
        if (r.outcome == HitOutcome::hit_boundary) ++hits;
    }
    const double p_hat = double(hits) / n;
    const double p_true = std::log(0.25 / 0.01) / std::log(0.5 / 0.01);
    const double se = std::sqrt(p_hat * (1.0 - p_hat) / n);
    const double dev = std::abs(p_hat - p_true) / se;
    Outcome o;
    o.pass = dev <= 3.0;
    o.detail = fmt("p_hat = %.4f vs log-potential %.4f, deviation %.2f SE (<= 3)", p_hat,
                   p_true, dev);
    return o;
}

Outcome c11_staged_pipeline() {
    OUConfig cfg;  // reference diffusion parameters
    const std::array<double, 3> radii{0.5, 1.0, 1.5};

    // Full deformed run at the reference design must finish in budget.
    const auto t0 = std::chrono::steady_clock::now();
    cfg.seed = 2026;
    const StagedReport ref = run_ou_pipeline(cfg, radii, 300, {2, 2});
    const double ref_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok_run = ref_seconds < 300.0 && !ref.extinct && !ref.containment_warning;

    // First-threshold hit angles are far from uniform: a 300-hit sample
    // must reject at the 1% level.
    std::vector<double> unit;
    {
        const Boundary first = Boundary::circle(radii[0]);
        OUConfig walk = cfg;
        for (int j = 0; unit.size() < 300 && j < 20000; ++j) {
            std::mt19937_64 rng = substream(33, std::uint64_t(j));
            const HitRecord r = simulate_first_hit(walk, first, rng);
            if (r.outcome == HitOutcome::hit_boundary) unit.push_back(r.hit_angle / kTwoPi);
        }
    }
    const double ks = unit.size() >= 300 ? ks_statistic(unit) : 0.0;
    const double crit = ks_critical(0.01, 300);
    const bool ok_reject = unit.size() >= 300 && ks > crit;

    // Paired comparison over twenty seeds: reshaping the boundary must
    // shrink the uniformity distance of the hit law on average.
    double total_gain = 0.0;
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        OUConfig c = cfg;
        c.seed = seed;
        const StagedReport rep = run_ou_pipeline(c, radii, 300, {2, 2});
        double gain = 0.0;
        int deformed = 0;
        for (const StageReport& s : rep.stages)
            if (s.deformed) {
                gain += s.ks_pre - s.ks_post;
                ++deformed;
            }
        if (deformed > 0) gain /= deformed;
        total_gain += gain;
        if (gain > 0.0) ++improved;
    }
    const double mean_gain = total_gain / 20.0;
    const bool ok_paired = mean_gain > 0.0;

    Outcome o;
    o.pass = ok_run && ok_reject && ok_paired;
    o.detail = fmt("run %.1fs (<300), KS %.4f > %.4f at n=300, mean paired KS gain %+.4f "
                   "(%d/20 seeds improved)",
                   ref_seconds, ks, crit, mean_gain, improved);
    return o;
}

}  // namespace

int main() {
    criterion(1, "benchmark chain: p = 0.0015 and entry mass 0.51, exactly",
              c1_worked_example);
    criterion(2, "balanced-design duplication endpoints 2(1+sqrt2) and 3", c2_duplication_endpoints);
    criterion(3, "four variance forms agree on 1000 random chains", c3_variance_agreement);
    criterion(4, "exhaustive enumeration matches every analytic variance form",
              c4_exhaustive_enumeration);
    criterion(5, "estimator unbiased over 1e5 replications with matching spread",
              c5_unbiasedness);
    criterion(6, "covariance-operator identity suite on 500 random chains", c6_identity_suite);
    criterion(7, "drop advice sign matches the exact corrective at preserved cost",
              c7_deletion_advice);
    criterion(8, "frontier reweighting is entrywise exact and cost neutral", c8_reweighting);
    criterion(9, "conformal round trip, rigid circle, and perimeter convention",
              c9_conformal_round_trip);
    criterion(10, "pure-diffusion annulus exit matches the logarithmic potential",
              c10_annulus_exit);
    criterion(11, "staged diffusion pipeline: budget, non-uniformity, paired KS gain",
              c11_staged_pipeline);

    std::printf("%d of 11 criteria passed\n", 11 - g_failures);
    return g_failures;
}
