#include "msplit/variance.hpp"

#include <cmath>

namespace msplit {

void Plan::validate(int M) const {
    require(N >= 1, "plan: N must be >= 1");
    require(R.size() == std::size_t(M), "plan: expected M duplication factors");
    for (std::int64_t r : R) require(r >= 1, "plan: duplication factors must be >= 1");
    std::int64_t run = N;
    for (std::int64_t r : R) {
        if (run > (std::int64_t(1) << 62) / r)
            throw infeasible_error("plan: cumulative replication exceeds 2^62");
        run *= r;
    }
}

std::vector<std::int64_t> Plan::counts(int M) const {
    validate(M);
    std::vector<std::int64_t> r(std::size_t(M) + 1);
    r[0] = N;
    for (int k = 1; k <= M; ++k) r[std::size_t(k)] = r[std::size_t(k - 1)] * R[std::size_t(k - 1)];
    return r;
}

std::vector<double> Plan::profile(int M) const {
    std::vector<std::int64_t> c = counts(M);
    return std::vector<double>(c.begin(), c.end());
}

namespace {

double mean_under(const Measure& mu, const LevelFn& f) { return value(mu, f); }

double var_under(const Measure& mu, const LevelFn& f, double mean) {
    Accum s;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double d = f[i] - mean;
        s.add(mu[i] * d * d);
    }
    return s.value();
}

void check_profile(const KernelChain& chain, const std::vector<double>& r) {
    require(r.size() == std::size_t(chain.M()) + 1, "variance: replication profile length mismatch");
    for (double x : r) require(x >= 1.0, "variance: replication profile entries must be >= 1");
    for (int k = 0; k <= chain.M() + 1; ++k)
        if (chain.gamma(k).total() <= 0.0)
            throw std::runtime_error("variance: degenerate chain, zero mass at a level");
}

}  // namespace

VarianceReport variance_two_part(const KernelChain& chain, const std::vector<double>& r) {
    check_profile(chain, r);
    const int M = chain.M();
    VarianceReport rep;
    rep.p = chain.p();

    Accum shape;
    for (int k = 1; k <= M; ++k) {
        Measure mu = chain.mu(k);
        double m = mean_under(mu, chain.f(k));
        if (m <= 0.0) throw std::runtime_error("variance: degenerate chain, mean success is zero");
        double v = var_under(mu, chain.f(k), m);
        double mass = chain.gamma(k).total();
        shape.add((1.0 / r[std::size_t(k - 1)] - 1.0 / r[std::size_t(k)]) * v / (m * m) / mass);
    }
    Accum position;
    for (int k = 0; k <= M; ++k) {
        double mg = mean_under(chain.mu(k), chain.g(k));
        if (mg <= 0.0) throw std::runtime_error("variance: degenerate chain, survival mean is zero");
        double mass = chain.gamma(k).total();
        position.add((1.0 - mg) / mg / (r[std::size_t(k)] * mass));
    }
    rep.shape_term = shape.value();
    rep.position_term = position.value();
    rep.total = rep.p * rep.p * (rep.shape_term + rep.position_term);

    rep.per_level.resize(std::size_t(M) + 1);
    for (int k = 0; k <= M; ++k) {
        LevelFn G = gamma_op(chain.kernel(k + 1), chain.f(k + 1));
        rep.per_level[std::size_t(k)] = value(chain.gamma(k), G) / r[std::size_t(k)];
    }
    return rep;
}

VarianceReport variance_two_part(const ChainSpec& spec, const Plan& plan) {
    KernelChain ch(spec);
    return variance_two_part(ch, plan.profile(spec.M));
}

double variance_gamma_form(const KernelChain& chain, const std::vector<double>& r, GammaForm form) {
    check_profile(chain, r);
    const int M = chain.M();
    if (form == GammaForm::telescoping) {
        Accum total;
        for (int k = 0; k <= M; ++k) {
            LevelFn G = gamma_op(chain.kernel(k + 1), chain.f(k + 1));
            total.add(value(chain.gamma(k), G) / r[std::size_t(k)]);
        }
        return total.value();
    }
    double p = chain.p();
    Accum rel;
    for (int k = 1; k <= M; ++k) {
        Measure mu = chain.mu(k);
        double m = mean_under(mu, chain.f(k));
        if (m <= 0.0) throw std::runtime_error("variance: degenerate chain, mean success is zero");
        LevelFn f2(chain.size(k), 0.0);
        for (std::size_t i = 0; i < f2.size(); ++i) f2[i] = chain.f(k)[i] * chain.f(k)[i];
        double m2 = mean_under(mu, f2);
        double mass = chain.gamma(k).total();
        rel.add((1.0 / r[std::size_t(k - 1)] - 1.0 / r[std::size_t(k)]) * (m2 / (m * m)) / mass);
    }
    rel.add(1.0 / (p * r[std::size_t(M)]));
    rel.add(-1.0 / r[0]);
    return p * p * rel.value();
}

double variance_gamma_form(const ChainSpec& spec, const Plan& plan, GammaForm form) {
    KernelChain ch(spec);
    return variance_gamma_form(ch, plan.profile(spec.M), form);
}

double variance_sigma_oracle(const ChainSpec& spec, const Plan& plan) {
    KernelChain chain(spec);
    const int M = chain.M();
    std::vector<double> r = plan.profile(M);

    // Covariance matrix of the per-subset counts, advanced one level at a
    // time: duplication scales it by R^2 through the step kernel, and the
    // step's own sampling noise adds a mixture of multinomial covariances
    // weighted by the expected occupation of the previous level.
    std::vector<std::vector<double>> sigma(1, std::vector<double>(1, 0.0));
    for (int n = 1; n <= M + 1; ++n) {
        const SubKernel& P = chain.kernel(n);
        const Measure& prev = chain.gamma(n - 1);
        double Rn = (n == 1) ? 1.0 : r[std::size_t(n - 1)] / r[std::size_t(n - 2)];
        double rn = r[std::size_t(n - 1)];

        std::vector<std::vector<double>> next(P.cols, std::vector<double>(P.cols, 0.0));
        for (std::size_t l = 0; l < P.cols; ++l)
            for (std::size_t c = 0; c < P.cols; ++c) {
                Accum s;
                for (std::size_t i = 0; i < P.rows; ++i)
                    for (std::size_t j = 0; j < P.rows; ++j)
                        s.add(P(i, l) * sigma[i][j] * P(j, c));
                Accum d;
                for (std::size_t i = 0; i < P.rows; ++i) {
                    double diag = (l == c) ? P(i, l) : 0.0;
                    d.add(prev[i] * (diag - P(i, l) * P(i, c)));
                }
                next[l][c] = Rn * Rn * s.value() + rn * d.value();
            }
        sigma = std::move(next);
    }
    return sigma[0][0] / (r[std::size_t(M)] * r[std::size_t(M)]);
}

double variance_unidim(const std::vector<double>& gammas, const std::vector<double>& r) {
    require(!gammas.empty(), "variance: gammas is empty");
    require(r.size() == gammas.size(), "variance: replication profile length mismatch");
    double prev = 1.0;
    for (double g : gammas) {
        require(g > 0.0 && g <= prev, "variance: gammas must be positive and nonincreasing");
        prev = g;
    }
    double p = gammas.back();
    Accum s;
    double g_prev = 1.0;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        s.add((1.0 / gammas[k] - 1.0 / g_prev) / r[k]);
        g_prev = gammas[k];
    }
    return p * p * s.value();
}

double variance_unidim(const std::vector<double>& gammas, const Plan& plan) {
    return variance_unidim(gammas, plan.profile(int(gammas.size()) - 1));
}

CostModel unit_cost() { return CostModel{}; }

CostModel reciprocal_cost() {
    CostModel m;
    m.name = "reciprocal";
    m.c = [](double x) {
        require(x > 0.0, "cost: reciprocal model needs positive success probabilities");
        return 1.0 / x;
    };
    return m;
}

std::vector<LevelFn> level_costs(const KernelChain& chain, const CostModel& model) {
    std::vector<LevelFn> cs(std::size_t(chain.M()) + 1);
    for (int k = 0; k <= chain.M(); ++k) {
        const LevelFn& g = chain.g(k);
        LevelFn ck(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) ck[i] = model.c(g[i]);
        cs[std::size_t(k)] = std::move(ck);
    }
    return cs;
}

CostReport cost(const KernelChain& chain, const std::vector<double>& r, const CostModel& model) {
    check_profile(chain, r);
    std::vector<LevelFn> cs = level_costs(chain, model);
    CostReport rep;
    rep.per_level.resize(std::size_t(chain.M()) + 1);
    Accum total;
    for (int k = 0; k <= chain.M(); ++k) {
        double x = r[std::size_t(k)] * value(chain.gamma(k), cs[std::size_t(k)]);
        rep.per_level[std::size_t(k)] = x;
        total.add(x);
    }
    rep.total = total.value();
    return rep;
}

CostReport cost(const ChainSpec& spec, const Plan& plan, const CostModel& model) {
    KernelChain ch(spec);
    return cost(ch, plan.profile(spec.M), model);
}

}  // namespace msplit
