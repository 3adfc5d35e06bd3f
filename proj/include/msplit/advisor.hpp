#pragma once

#include <cstdint>
#include <vector>

#include "msplit/chain.hpp"
#include "msplit/plan.hpp"
#include "msplit/variance.hpp"

namespace msplit {

// Balanced design for a one-subset chain: equal duplication R at every
// frontier, equal step probability p^(1/(M+1)), N sized to the budget.
struct OptimalPlan {
    int M = 0;
    std::int64_t R = 0;
    std::int64_t N = 0;
    double success_prob = 0.0;  // per-step probability p^(1/(M+1))
    double predicted_variance = 0.0;
    double predicted_cost = 0.0;
};

// If R_fixed >= 2 the duplication factor is taken as given and M is the
// integer bringing R p^(1/(M+1)) nearest one (ties toward larger M).
// Otherwise both integer neighbors of 1/p^(1/(M+1)) are tried for every
// M and the pair with the lowest predicted variance at the budget wins.
OptimalPlan optimize_plan(double p, double budget, const CostModel& model = unit_cost(),
                          std::int64_t R_fixed = 0);

// Variance and cost split attached to removing frontier k while
// reallocating the freed work through the multipliers lambda_{k-1..M-1}.
// corrective is the variance attributable to keeping the frontier;
// variance_without = variance_total - corrective.
struct DeletionSplit {
    double variance_total = 0.0;
    double variance_without = 0.0;
    double corrective = 0.0;
    double cost_total = 0.0;
    double cost_without = 0.0;
};

// c_tilde_prev holds the per-subset cost of the merged double step out of
// frontier k-1; it is an exogenous modeling input. Empty means unit cost.
DeletionSplit deletion_split(const ChainSpec& spec, const Plan& plan, int k,
                             const std::vector<double>& lambdas,
                             const CostModel& model = unit_cost(),
                             const LevelFn& c_tilde_prev = LevelFn{});

// Multipliers that make the deletion exactly cost neutral: the one
// touching the merged step absorbs the saved work, its successor undoes
// it, later levels are left alone.
std::vector<double> cost_preserving_lambdas(const ChainSpec& spec, const Plan& plan, int k,
                                            const CostModel& model = unit_cost(),
                                            const LevelFn& c_tilde_prev = LevelFn{});

// The chain with frontier k removed and its two adjacent steps composed.
ChainSpec delete_threshold(const ChainSpec& spec, int k);

// Replication profile of the merged chain under the reallocation
// multipliers; entries past k-2 pick up the cumulative multiplier.
std::vector<double> reallocated_profile(const std::vector<double>& r, int k,
                                        const std::vector<double>& lambdas);

// Keep-or-drop advice for one frontier of a one-subset chain under the
// standard cost split a_k = c_{k-1}/(c_{k-1} + c_k), assuming the merged
// step costs the sum of the two it replaces. The sign of the quadratic Q
// at g_prev is the sign of the corrective variance term at equal cost.
struct DeletionReport {
    double beta = 0.0;         // g_prev g_k
    double lambda_prev = 0.0;  // cost-neutral multiplier a_k/R_k + g_prev (1 - a_k)
    double Q = 0.0;
    double delta = 0.0;    // discriminant of the reduced quadratic (cases 2-4)
    double x_minus = 0.0;  // roots when real, otherwise NaN
    double x_plus = 0.0;
    int case_id = 0;  // 1: R_k beta = 1, 2: > 1, 3/4: < 1 without/with real roots
    bool drop = false;
};

DeletionReport advise_deletion(double g_prev, double g_k, double R_k, double a_k);

// Where to put a frontier between two fixed neighbors at cost parity,
// unit costs, as a function of beta, the two-step success probability.
// Above beta = 1/9 no interior frontier lowers the variance; at or below
// it the optimum position and duplication follow closed forms (at
// exactly 1/9 they reach their limits 1/3 and 3).
struct InsertionAdvice {
    bool worthwhile = false;
    double g_star = 0.0;
    double R_star = 0.0;
};

InsertionAdvice simplified_cost_optimum(double beta);

// Frontier k moved by reweighting: step k is scaled entrywise by the
// factors K g_k(j) and step k+1 divided by them, leaving the two-step
// product intact while the new frontier's survival profile becomes the
// constant 1/K.
struct PerturbedLevel {
    int k = 0;
    double K = 0.0;
    LevelFn factors;        // K g_k(j)
    SubKernel Pk_tilde;     // step k scaled into the new frontier
    SubKernel Pk1_tilde;    // step k+1 scaled out of it
    LevelFn g_prev_tilde;   // survival profile of step k after the move
    double g_k_tilde = 0.0; // constant survival 1/K out of the new frontier
    double mass_tilde = 0.0;  // K gamma_{k+1}(1), the new frontier's mass
    ChainSpec perturbed;
};

PerturbedLevel perturb_threshold(const ChainSpec& spec, int k, double K);

// The factor K making the move cost neutral when the two affected levels
// are billed at the exogenous merged costs c_tilde_prev and c_tilde_k.
double optimal_K(const ChainSpec& spec, const Plan& plan, int k, const CostModel& model,
                 double c_tilde_prev, double c_tilde_k);

// Weighted cost of the perturbed chain with the two affected levels
// billed at the merged costs and all others at the model's own values.
double perturbed_cost(const PerturbedLevel& pl, const Plan& plan, const CostModel& model,
                      double c_tilde_prev, double c_tilde_k);

}  // namespace msplit
