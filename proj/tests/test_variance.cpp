#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "msplit/variance.hpp"

using namespace msplit;
using testutil::close;

namespace {

Plan random_plan(std::mt19937_64& rng, int M) {
    std::uniform_int_distribution<std::int64_t> pick_N(1, 500);
    std::uniform_int_distribution<std::int64_t> pick_R(1, 6);
    Plan p;
    p.N = pick_N(rng);
    for (int k = 0; k < M; ++k) p.R.push_back(pick_R(rng));
    return p;
}

// One-subset chain with the given per-step survival probabilities; the
// last entry is the exit probability.
ChainSpec scalar_chain(const std::vector<double>& steps) {
    ChainSpec s;
    s.M = int(steps.size()) - 1;
    s.gamma1 = Measure({steps[0]});
    for (int k = 1; k + 1 < int(steps.size()); ++k) {
        SubKernel P(1, 1);
        P(0, 0) = steps[std::size_t(k)];
        s.kernels.push_back(P);
    }
    s.fM = LevelFn({steps.back()});
    return s;
}

}  // namespace

TEST_CASE("all four variance routes agree on random chains") {
    std::mt19937_64 rng(9101);
    for (int rep = 0; rep < 250; ++rep) {
        ChainSpec s = testutil::random_spec(rng, 4, 4);
        Plan plan = random_plan(rng, s.M);
        VarianceReport tp = variance_two_part(s, plan);
        double v1 = variance_gamma_form(s, plan, GammaForm::telescoping);
        double v2 = variance_gamma_form(s, plan, GammaForm::second_moment);
        double v3 = variance_sigma_oracle(s, plan);
        CHECK(close(tp.total, v1, 1e-10));
        CHECK(close(tp.total, v2, 1e-10));
        CHECK(close(tp.total, v3, 1e-10));
        CHECK(tp.total >= 0.0);
        CHECK(tp.shape_term >= -1e-15);
        CHECK(tp.position_term > 0.0);

        double sum = 0.0;
        for (double x : tp.per_level) {
            CHECK(x >= -1e-18);
            sum += x;
        }
        CHECK(close(sum, tp.total, 1e-10));
    }
}

TEST_CASE("shape term vanishes when the success function is flat") {
    // Constant fM over a single frontier makes f_1 constant.
    ChainSpec s;
    s.M = 1;
    s.gamma1 = Measure({0.2, 0.3, 0.1});
    s.fM = LevelFn({0.4, 0.4, 0.4});
    Plan plan{50, {3}};
    VarianceReport rep = variance_two_part(s, plan);
    CHECK(std::abs(rep.shape_term) < 1e-15);
}

TEST_CASE("exact enumeration of tiny chains matches the closed forms") {
    // Canonical case: two starters, one frontier with two subsets,
    // duplication two.
    ChainSpec s;
    s.M = 1;
    s.gamma1 = Measure({0.3, 0.25});
    s.fM = LevelFn({0.6, 0.15});
    Plan plan{2, {2}};
    testutil::ExactMoments ex = testutil::enumerate_estimator(s, plan);
    double p = chain_probability(s);
    CHECK(close(ex.mean, p, 1e-13));
    VarianceReport tp = variance_two_part(s, plan);
    CHECK(close(ex.variance(), tp.total, 1e-12));
    CHECK(close(ex.variance(), variance_gamma_form(s, plan, GammaForm::telescoping), 1e-12));
    CHECK(close(ex.variance(), variance_gamma_form(s, plan, GammaForm::second_moment), 1e-12));
    CHECK(close(ex.variance(), variance_sigma_oracle(s, plan), 1e-12));

    // Random tiny chains, two frontiers deep.
    std::mt19937_64 rng(9202);
    for (int rep = 0; rep < 25; ++rep) {
        ChainSpec t = testutil::random_spec(rng, 2, 2);
        Plan pl;
        pl.N = 2;
        for (int k = 0; k < t.M; ++k) pl.R.push_back(2);
        testutil::ExactMoments m = testutil::enumerate_estimator(t, pl);
        CHECK(close(m.mean, chain_probability(t), 1e-12));
        CHECK(close(m.variance(), variance_sigma_oracle(t, pl), 1e-11));
        CHECK(close(m.variance(), variance_two_part(t, pl).total, 1e-11));
    }
}

TEST_CASE("one-subset shortcut: balanced plans equalize the terms") {
    // p = 2^-6 over three equal steps of 1/4 with duplication 4: every
    // level contributes (1/N)(1/q - 1) and the total is p^2 times
    // (M+1)(1/q - 1)/N.
    double q = 0.25, p = std::pow(q, 3);
    Plan plan{64, {4, 4}};
    double v = variance_unidim({q, q * q, p}, plan);
    CHECK(close(v, p * p * 3.0 * (1.0 / q - 1.0) / 64.0, 1e-14));
}

TEST_CASE("one-subset shortcut agrees with the general formulas") {
    std::mt19937_64 rng(9303);
    std::uniform_real_distribution<double> step(0.1, 0.9);
    for (int rep = 0; rep < 100; ++rep) {
        int M = 1 + int(rng() % 4);
        std::vector<double> steps;
        for (int k = 0; k <= M; ++k) steps.push_back(step(rng));
        ChainSpec s = scalar_chain(steps);
        Plan plan = random_plan(rng, M);
        std::vector<double> gammas(std::size_t(M) + 1);
        double run = 1.0;
        for (int k = 0; k <= M; ++k) {
            run *= steps[std::size_t(k)];
            gammas[std::size_t(k)] = run;
        }
        CHECK(close(variance_unidim(gammas, plan), variance_two_part(s, plan).total, 1e-11));
    }
}

TEST_CASE("one-subset shortcut validates its inputs") {
    Plan plan{10, {2}};
    CHECK_THROWS_AS(variance_unidim({0.2, 0.5}, plan), config_error);
    CHECK_THROWS_AS(variance_unidim({0.2, 0.0}, plan), config_error);
    CHECK_THROWS_AS(variance_unidim({}, plan), config_error);
}

TEST_CASE("expected cost: balanced chain keeps every level at N work units") {
    double q = 0.25;
    ChainSpec s = scalar_chain({q, q, q});
    Plan plan{64, {4, 4}};
    CostReport unit = cost(s, plan);
    CHECK(close(unit.total, 64.0 * 3.0, 1e-14));
    for (double x : unit.per_level) CHECK(close(x, 64.0, 1e-14));

    CostReport rec = cost(s, plan, reciprocal_cost());
    CHECK(close(rec.total, 64.0 * 3.0 / q, 1e-14));
}

TEST_CASE("expected cost matches a naive per-level sum") {
    std::mt19937_64 rng(9404);
    for (int rep = 0; rep < 100; ++rep) {
        ChainSpec s = testutil::random_spec(rng, 4, 4);
        Plan plan = random_plan(rng, s.M);
        KernelChain ch(s);
        auto r = plan.profile(s.M);
        CostReport rep_unit = cost(s, plan);
        double naive = 0.0;
        for (int k = 0; k <= s.M; ++k) {
            double mass = 0.0;
            for (double x : ch.gamma(k).w) mass += x;
            naive += r[std::size_t(k)] * mass;
        }
        CHECK(close(rep_unit.total, naive, 1e-12));
    }
}

TEST_CASE("degenerate chains are rejected with an explicit error") {
    ChainSpec s;
    s.M = 2;
    s.gamma1 = Measure({0.5});
    SubKernel dead(1, 1);
    dead(0, 0) = 0.0;
    s.kernels.push_back(dead);
    s.fM = LevelFn({0.5});
    Plan plan{10, {2, 2}};
    CHECK_THROWS_AS(variance_two_part(s, plan), std::runtime_error);
    CHECK_THROWS_AS(variance_gamma_form(s, plan, GammaForm::second_moment), std::runtime_error);
}

TEST_CASE("plan validation rejects overflowing replication counts") {
    Plan plan;
    plan.N = std::int64_t(1) << 40;
    plan.R = {std::int64_t(1) << 12, std::int64_t(1) << 12};
    CHECK_THROWS_AS(plan.validate(2), infeasible_error);
    Plan ok{100, {2, 2}};
    CHECK_NOTHROW(ok.validate(2));
    CHECK_THROWS_AS(ok.validate(3), config_error);
    Plan bad{0, {2}};
    CHECK_THROWS_AS(bad.validate(1), config_error);
}
