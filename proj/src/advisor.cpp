#include "msplit/advisor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msplit {

namespace {

// Predicted relative variance of a balanced candidate, or +inf when the
// replication profile overflows or the budget leaves no starting mass.
struct Candidate {
    int M = 0;
    std::int64_t R = 0;
    std::int64_t N = 0;
    double q = 0.0;
    double variance = std::numeric_limits<double>::infinity();
    double cost = std::numeric_limits<double>::infinity();
    bool feasible = false;
};

Candidate evaluate_candidate(double p, double budget, const CostModel& model, int M,
                             std::int64_t R) {
    Candidate cand;
    cand.M = M;
    cand.R = R;
    cand.q = std::pow(p, 1.0 / (M + 1));

    const double cq = model.c(cand.q);
    require(cq > 0.0, "optimize: cost of the step probability must be positive");

    Accum growth;
    double term = 1.0;
    for (int n = 0; n <= M; ++n) {
        growth.add(term);
        term *= static_cast<double>(R) * cand.q;
    }
    const double per_start = cq * growth.value();
    const double n_real = std::floor(budget / per_start);
    if (n_real < 1.0 || n_real > 9.0e18) return cand;
    cand.N = static_cast<std::int64_t>(n_real);

    Plan plan;
    plan.N = cand.N;
    plan.R.assign(static_cast<std::size_t>(M), R);
    try {
        plan.validate(M);
    } catch (const infeasible_error&) {
        return cand;
    }

    std::vector<double> gammas(static_cast<std::size_t>(M) + 1);
    for (int kk = 1; kk <= M + 1; ++kk)
        gammas[static_cast<std::size_t>(kk) - 1] = std::pow(cand.q, kk);
    cand.variance = variance_unidim(gammas, plan);
    cand.cost = static_cast<double>(cand.N) * per_start;
    cand.feasible = true;
    return cand;
}

double cumulative_multiplier(const std::vector<double>& lambdas, int k, int j) {
    // Lambda_j = product of lambda_{k-1}..lambda_j.
    double prod = 1.0;
    for (int i = k - 1; i <= j; ++i) prod *= lambdas[static_cast<std::size_t>(i - (k - 1))];
    return prod;
}

LevelFn resolve_merged_cost(const LevelFn& c_tilde_prev, std::size_t size) {
    if (c_tilde_prev.v.empty()) return LevelFn(size, 1.0);
    require(c_tilde_prev.v.size() == size,
            "deletion: merged step cost must live on the level before the dropped frontier");
    return c_tilde_prev;
}

std::vector<double> integrated_costs(const KernelChain& chain, const CostModel& model) {
    // gamma_n(c_n) for n = 0..M, the expected per-start cost of level n.
    const std::vector<LevelFn> fns = level_costs(chain, model);
    std::vector<double> out(fns.size());
    for (std::size_t n = 0; n < fns.size(); ++n)
        out[n] = value(chain.gamma(static_cast<int>(n)), fns[n]);
    return out;
}

void check_deletion_args(const KernelChain& chain, const Plan& plan, int k,
                         const std::vector<double>& lambdas) {
    const int M = chain.M();
    require(M >= 2, "deletion: need at least two frontiers to drop one");
    require(k >= 1 && k <= M, "deletion: frontier index out of range");
    require(lambdas.size() == static_cast<std::size_t>(M - k + 1),
            "deletion: need one multiplier per level from k-1 to M-1");
    for (double l : lambdas) require(l > 0.0, "deletion: multipliers must be positive");
    plan.validate(M);
}

}  // namespace

OptimalPlan optimize_plan(double p, double budget, const CostModel& model,
                          std::int64_t R_fixed) {
    require(p > 0.0 && p < 1.0, "optimize: probability must lie strictly inside (0,1)");
    require(budget > 0.0, "optimize: budget must be positive");
    require(R_fixed == 0 || R_fixed >= 2, "optimize: a fixed duplication factor must be >= 2");

    // Past this point even R = 2 has R q > 1 and the workload per start
    // only grows, so deeper chains cannot help.
    const int M_cap = std::min(200, static_cast<int>(std::ceil(-std::log(p) / std::log(2.0))) + 2);

    Candidate best;
    bool any = false;

    if (R_fixed >= 2) {
        int best_M = 1;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int M = 1; M <= std::max(M_cap, 200); ++M) {
            const double q = std::pow(p, 1.0 / (M + 1));
            const double gap = std::abs(static_cast<double>(R_fixed) * q - 1.0);
            if (gap < best_gap - 1e-15 || std::abs(gap - best_gap) <= 1e-15) {
                best_gap = std::min(gap, best_gap);
                best_M = M;
            }
        }
        best = evaluate_candidate(p, budget, model, best_M, R_fixed);
        any = best.feasible;
    } else {
        for (int M = 1; M <= M_cap; ++M) {
            const double q = std::pow(p, 1.0 / (M + 1));
            const double r0 = 1.0 / q;
            std::int64_t lo = std::max<std::int64_t>(2, static_cast<std::int64_t>(std::floor(r0)));
            std::int64_t hi = std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(r0)));
            for (std::int64_t R : {lo, hi}) {
                Candidate cand = evaluate_candidate(p, budget, model, M, R);
                if (cand.feasible) {
                    const bool better =
                        !any || cand.variance < best.variance ||
                        (cand.variance == best.variance && cand.M > best.M);
                    if (better) best = cand;
                    any = true;
                }
                if (hi == lo) break;
            }
        }
    }

    if (!any || !best.feasible)
        throw infeasible_error("optimize: budget too small for even one start at any depth");

    OptimalPlan out;
    out.M = best.M;
    out.R = best.R;
    out.N = best.N;
    out.success_prob = best.q;
    out.predicted_variance = best.variance;
    out.predicted_cost = best.cost;
    return out;
}

DeletionSplit deletion_split(const ChainSpec& spec, const Plan& plan, int k,
                             const std::vector<double>& lambdas, const CostModel& model,
                             const LevelFn& c_tilde_prev) {
    KernelChain chain(spec);
    check_deletion_args(chain, plan, k, lambdas);
    const int M = chain.M();
    const std::vector<double> r = plan.profile(M);
    const double R_k = static_cast<double>(plan.R[static_cast<std::size_t>(k) - 1]);
    const LevelFn merged_cost = resolve_merged_cost(c_tilde_prev, chain.size(k - 1));

    const double var_total = variance_gamma_form(spec, plan, GammaForm::telescoping);

    Accum corr;
    {
        const double lam = cumulative_multiplier(lambdas, k, k - 1);
        const double w = (1.0 - 1.0 / (lam * R_k)) / r[static_cast<std::size_t>(k) - 1];
        corr.add(w * value(chain.gamma(k - 1), gamma_op(chain.kernel(k), chain.f(k))));
    }
    for (int j = k; j <= M; ++j) {
        const double lam = cumulative_multiplier(lambdas, k, j - 1);
        const double w = (1.0 - 1.0 / lam) / r[static_cast<std::size_t>(j)];
        corr.add(w * value(chain.gamma(j), gamma_op(chain.kernel(j + 1), chain.f(j + 1))));
    }

    const std::vector<double> costs = integrated_costs(chain, model);
    Accum cost_total;
    for (int n = 0; n <= M; ++n)
        cost_total.add(r[static_cast<std::size_t>(n)] * costs[static_cast<std::size_t>(n)]);

    Accum removed;
    {
        const double lam = cumulative_multiplier(lambdas, k, k - 1);
        const double merged = value(chain.gamma(k - 1), merged_cost);
        removed.add(r[static_cast<std::size_t>(k) - 1] *
                    (costs[static_cast<std::size_t>(k) - 1] - R_k * lam * merged));
    }
    removed.add(r[static_cast<std::size_t>(k)] * costs[static_cast<std::size_t>(k)]);
    for (int j = k + 1; j <= M; ++j) {
        const double lam = cumulative_multiplier(lambdas, k, j - 1);
        removed.add(r[static_cast<std::size_t>(j)] * costs[static_cast<std::size_t>(j)] *
                    (1.0 - lam));
    }

    DeletionSplit out;
    out.variance_total = var_total;
    out.corrective = corr.value();
    out.variance_without = out.variance_total - out.corrective;
    out.cost_total = cost_total.value();
    out.cost_without = out.cost_total - removed.value();
    return out;
}

std::vector<double> cost_preserving_lambdas(const ChainSpec& spec, const Plan& plan, int k,
                                            const CostModel& model,
                                            const LevelFn& c_tilde_prev) {
    KernelChain chain(spec);
    const int M = chain.M();
    require(M >= 2, "deletion: need at least two frontiers to drop one");
    require(k >= 1 && k <= M, "deletion: frontier index out of range");
    plan.validate(M);
    const double R_k = static_cast<double>(plan.R[static_cast<std::size_t>(k) - 1]);
    const LevelFn merged_cost = resolve_merged_cost(c_tilde_prev, chain.size(k - 1));

    const std::vector<double> costs = integrated_costs(chain, model);
    const double merged = value(chain.gamma(k - 1), merged_cost);
    require(merged > 0.0, "deletion: merged step cost has no mass on the entry level");

    const double lambda_prev =
        (costs[static_cast<std::size_t>(k) - 1] + R_k * costs[static_cast<std::size_t>(k)]) /
        (R_k * merged);

    std::vector<double> lambdas(static_cast<std::size_t>(M - k + 1), 1.0);
    lambdas[0] = lambda_prev;
    if (lambdas.size() > 1) lambdas[1] = 1.0 / lambda_prev;
    return lambdas;
}

ChainSpec delete_threshold(const ChainSpec& spec, int k) {
    KernelChain chain(spec);
    const int M = chain.M();
    require(M >= 2, "deletion: need at least two frontiers to drop one");
    require(k >= 1 && k <= M, "deletion: frontier index out of range");

    const SubKernel& A = chain.kernel(k);
    const SubKernel& B = chain.kernel(k + 1);
    SubKernel merged;
    merged.rows = A.rows;
    merged.cols = B.cols;
    merged.a.assign(merged.rows * merged.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t l = 0; l < B.cols; ++l) {
            Accum s;
            for (std::size_t j = 0; j < A.cols; ++j) s.add(A(i, j) * B(j, l));
            merged.a[i * merged.cols + l] = s.value();
        }

    std::vector<SubKernel> steps;
    steps.reserve(static_cast<std::size_t>(M));
    for (int n = 1; n <= M + 1; ++n) {
        if (n == k) {
            steps.push_back(merged);
            continue;
        }
        if (n == k + 1) continue;
        steps.push_back(chain.kernel(n));
    }

    ChainSpec out;
    out.M = M - 1;
    out.gamma1.w = steps.front().a;
    out.fM.v = steps.back().a;
    out.kernels.assign(steps.begin() + 1, steps.end() - 1);
    out.validate();
    return out;
}

std::vector<double> reallocated_profile(const std::vector<double>& r, int k,
                                        const std::vector<double>& lambdas) {
    const int M = static_cast<int>(r.size()) - 1;
    require(M >= 2, "deletion: need at least two frontiers to drop one");
    require(k >= 1 && k <= M, "deletion: frontier index out of range");
    require(lambdas.size() == static_cast<std::size_t>(M - k + 1),
            "deletion: need one multiplier per level from k-1 to M-1");

    std::vector<double> out(static_cast<std::size_t>(M));
    for (int j = 0; j <= k - 2; ++j) out[static_cast<std::size_t>(j)] = r[static_cast<std::size_t>(j)];
    for (int j = k - 1; j <= M - 1; ++j)
        out[static_cast<std::size_t>(j)] =
            cumulative_multiplier(lambdas, k, j) * r[static_cast<std::size_t>(j) + 1];
    return out;
}

DeletionReport advise_deletion(double g_prev, double g_k, double R_k, double a_k) {
    require(g_prev > 0.0 && g_prev < 1.0, "advise: previous step probability must be in (0,1)");
    require(g_k > 0.0 && g_k < 1.0, "advise: dropped step probability must be in (0,1)");
    require(R_k >= 1.0, "advise: duplication factor must be at least 1");
    require(a_k > 0.0 && a_k < 1.0, "advise: cost share must be in (0,1)");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    DeletionReport rep;
    rep.beta = g_prev * g_k;
    rep.lambda_prev = a_k / R_k + g_prev * (1.0 - a_k);
    rep.delta = nan;
    rep.x_minus = nan;
    rep.x_plus = nan;

    const double lead = R_k * (R_k * rep.beta - 1.0) * (1.0 - a_k);
    rep.Q = -g_prev * g_prev * lead + g_prev * (lead - a_k * (R_k - 1.0)) +
            (R_k - 1.0) * rep.beta * a_k;

    if (std::abs(R_k * rep.beta - 1.0) < 1e-9) {
        // Q degenerates to a_k (R_k - 1)(beta - g_prev) <= 0: always keep.
        rep.case_id = 1;
        rep.drop = false;
        return rep;
    }

    const double alpha = a_k * (R_k - 1.0) / (R_k * (1.0 - a_k) * (R_k * rep.beta - 1.0));
    rep.delta = (1.0 - alpha) * (1.0 - alpha) + 4.0 * alpha * rep.beta;

    if (R_k * rep.beta > 1.0) {
        rep.case_id = 2;
        rep.x_minus = 0.5 * ((1.0 - alpha) - std::sqrt(rep.delta));
        rep.x_plus = 0.5 * ((1.0 - alpha) + std::sqrt(rep.delta));
        rep.drop = g_prev < rep.x_plus;
        return rep;
    }

    if (rep.delta < 0.0) {
        rep.case_id = 3;
        rep.drop = true;
        return rep;
    }

    rep.case_id = 4;
    rep.x_minus = 0.5 * ((1.0 - alpha) - std::sqrt(rep.delta));
    rep.x_plus = 0.5 * ((1.0 - alpha) + std::sqrt(rep.delta));
    rep.drop = g_prev < rep.x_minus;
    return rep;
}

InsertionAdvice simplified_cost_optimum(double beta) {
    require(beta >= 0.0 && beta < 1.0, "insertion: two-step probability must be in [0,1)");
    InsertionAdvice out;
    if (beta > 1.0 / 9.0) {
        out.worthwhile = false;
        out.g_star = std::numeric_limits<double>::quiet_NaN();
        out.R_star = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    out.worthwhile = beta < 1.0 / 9.0;
    out.g_star = 0.5 * (1.0 - 3.0 * beta);
    out.R_star = 2.0 * (1.0 - 5.0 * beta) / (1.0 - 9.0 * beta * beta) *
                 (1.0 + std::sqrt(2.0 * (1.0 - beta) / (1.0 - 5.0 * beta)));
    return out;
}

PerturbedLevel perturb_threshold(const ChainSpec& spec, int k, double K) {
    KernelChain chain(spec);
    const int M = chain.M();
    require(k >= 1 && k <= M, "perturb: frontier index out of range");
    require(std::isfinite(K) && K > 0.0, "perturb: scale factor must be positive");

    const LevelFn& gk = chain.g(k);
    PerturbedLevel out;
    out.k = k;
    out.K = K;
    out.factors.v.resize(gk.v.size());
    for (std::size_t j = 0; j < gk.v.size(); ++j) {
        if (gk.v[j] <= 0.0)
            throw std::runtime_error(
                "perturb: frontier has a dead subset, the reweighting is undefined");
        out.factors.v[j] = K * gk.v[j];
    }

    const SubKernel& A = chain.kernel(k);
    const SubKernel& B = chain.kernel(k + 1);
    out.Pk_tilde = A;
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j)
            out.Pk_tilde.a[i * A.cols + j] = A(i, j) * out.factors.v[j];
    out.Pk1_tilde = B;
    for (std::size_t j = 0; j < B.rows; ++j)
        for (std::size_t l = 0; l < B.cols; ++l)
            out.Pk1_tilde.a[j * B.cols + l] = B(j, l) / out.factors.v[j];

    const double slack = 1e-12;
    out.g_prev_tilde = out.Pk_tilde.row_sums();
    for (double s : out.g_prev_tilde.v)
        if (s > 1.0 + slack)
            throw std::runtime_error("perturb: scale factor outside the admissible range, "
                                     "the rescaled step would exceed probability one");
    for (double s : out.Pk1_tilde.row_sums().v)
        if (s > 1.0 + slack)
            throw std::runtime_error("perturb: scale factor outside the admissible range, "
                                     "the inverse rescaling would exceed probability one");

    out.g_k_tilde = 1.0 / K;
    out.mass_tilde = K * chain.gamma(k + 1).total();

    ChainSpec mod = spec;
    if (k == 1)
        mod.gamma1.w = out.Pk_tilde.a;
    else
        mod.kernels[static_cast<std::size_t>(k) - 2] = out.Pk_tilde;
    if (k + 1 == M + 1)
        mod.fM.v = out.Pk1_tilde.a;
    else
        mod.kernels[static_cast<std::size_t>(k) - 1] = out.Pk1_tilde;
    mod.validate();
    out.perturbed = std::move(mod);

    // The two rescalings must cancel exactly: rebuilding the composed
    // step from the stored pieces has to reproduce, bit for bit, the
    // composition of freshly rescaled copies of the original steps.
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t l = 0; l < B.cols; ++l) {
            Accum stored, fresh;
            for (std::size_t j = 0; j < A.cols; ++j) {
                stored.add(out.Pk_tilde(i, j) * out.Pk1_tilde(j, l));
                fresh.add((A(i, j) * out.factors.v[j]) * (B(j, l) / out.factors.v[j]));
            }
            if (stored.value() != fresh.value())
                throw std::runtime_error("perturb: composed step failed to reconstruct exactly");
        }
    return out;
}

double optimal_K(const ChainSpec& spec, const Plan& plan, int k, const CostModel& model,
                 double c_tilde_prev, double c_tilde_k) {
    KernelChain chain(spec);
    const int M = chain.M();
    require(k >= 1 && k <= M, "perturb: frontier index out of range");
    require(c_tilde_k > 0.0, "perturb: merged cost of the moved frontier must be positive");
    plan.validate(M);
    const double R_k = static_cast<double>(plan.R[static_cast<std::size_t>(k) - 1]);

    const double mass_prev = chain.gamma(k - 1).total();
    const double mass_next = chain.gamma(k + 1).total();
    require(mass_next > 0.0, "perturb: no mass survives the moved frontier");
    const double beta = mass_next / mass_prev;

    const Measure& mu_prev = chain.mu(k - 1);
    const Measure& mu_k = chain.mu(k);
    Accum cprev, ck, gk;
    for (std::size_t i = 0; i < mu_prev.w.size(); ++i)
        cprev.add(mu_prev.w[i] * model.c(chain.g(k - 1).v[i]));
    for (std::size_t i = 0; i < mu_k.w.size(); ++i) {
        ck.add(mu_k.w[i] * model.c(chain.g(k).v[i]));
        gk.add(mu_k.w[i] * chain.g(k).v[i]);
    }
    require(gk.value() > 0.0, "perturb: frontier survival vanishes on average");

    return (ck.value() / gk.value() + (cprev.value() - c_tilde_prev) / (R_k * beta)) / c_tilde_k;
}

double perturbed_cost(const PerturbedLevel& pl, const Plan& plan, const CostModel& model,
                      double c_tilde_prev, double c_tilde_k) {
    KernelChain chain(pl.perturbed);
    const int M = chain.M();
    plan.validate(M);
    const std::vector<double> r = plan.profile(M);

    Accum total;
    for (int n = 0; n <= M; ++n) {
        const Measure& gamma_n = chain.gamma(n);
        Accum level;
        if (n == pl.k - 1) {
            for (double w : gamma_n.w) level.add(w * c_tilde_prev);
        } else if (n == pl.k) {
            for (double w : gamma_n.w) level.add(w * c_tilde_k);
        } else {
            const LevelFn& gn = chain.g(n);
            for (std::size_t i = 0; i < gamma_n.w.size(); ++i)
                level.add(gamma_n.w[i] * model.c(gn.v[i]));
        }
        total.add(r[static_cast<std::size_t>(n)] * level.value());
    }
    return total.value();
}

}  // namespace msplit
