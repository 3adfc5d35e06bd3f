#pragma once

#include <functional>
#include <string>
#include <vector>

#include "msplit/chain.hpp"
#include "msplit/plan.hpp"

namespace msplit {

// Closed-form variance of the splitting estimator, split into the two
// mechanisms that produce it: dispersion of the success function across
// each frontier (shape) and the randomness of survival itself (position).
// shape_term and position_term are relative (variance over p^2);
// per_level[k] is the absolute contribution attached to level k.
struct VarianceReport {
    double p = 0.0;
    double shape_term = 0.0;
    double position_term = 0.0;
    double total = 0.0;
    std::vector<double> per_level;
};

VarianceReport variance_two_part(const ChainSpec& spec, const Plan& plan);
VarianceReport variance_two_part(const KernelChain& chain, const std::vector<double>& r);

// Single-sum forms of the same variance. `telescoping` accumulates the
// per-level covariance operators; `second_moment` keeps raw second
// moments and telescopes only the survival part.
enum class GammaForm { telescoping, second_moment };

double variance_gamma_form(const ChainSpec& spec, const Plan& plan, GammaForm form);
double variance_gamma_form(const KernelChain& chain, const std::vector<double>& r, GammaForm form);

// Matrix recursion for the full covariance of the per-subset counts,
// propagated level by level and read off at the target. Independent of
// the summed forms above; kept as a cross-check oracle.
double variance_sigma_oracle(const ChainSpec& spec, const Plan& plan);

// One-subset-per-frontier shortcut. gammas lists the cumulative reach
// probabilities of frontiers 1..M+1 (the last one is p itself).
double variance_unidim(const std::vector<double>& gammas, const Plan& plan);
double variance_unidim(const std::vector<double>& gammas, const std::vector<double>& r);

// Per-particle simulation cost as a function of the local success
// probability; decreasing, with unit cost as the trivial case.
struct CostModel {
    std::string name = "unit";
    std::function<double(double)> c = [](double) { return 1.0; };
};

CostModel unit_cost();
CostModel reciprocal_cost();  // c(x) = 1/x

struct CostReport {
    double total = 0.0;
    std::vector<double> per_level;  // r_k gamma_k(c_k), k = 0..M
};

// Expected total work: sum over levels of live-particle count times the
// per-particle cost of the next step, c_k(i) = c(g_k(i)).
CostReport cost(const ChainSpec& spec, const Plan& plan, const CostModel& model = unit_cost());
CostReport cost(const KernelChain& chain, const std::vector<double>& r, const CostModel& model);

// Values c_k(i) = c(g_k(i)) for k = 0..M, reused by the advisor.
std::vector<LevelFn> level_costs(const KernelChain& chain, const CostModel& model);

}  // namespace msplit
