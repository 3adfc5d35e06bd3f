#include "msplit/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace msplit {

namespace {

constexpr double kRowSlack = 1e-12;

bool close_rel(double a, double b, double rel, double abs_floor) {
    double d = std::abs(a - b);
    return d <= abs_floor || d <= rel * std::max(std::abs(a), std::abs(b));
}

double binom_coeff(int n, int k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
    return c;
}

}  // namespace

void ChainSpec::validate() const {
    require(M >= 1, "chain: M must be >= 1");
    require(gamma1.size() >= 1, "chain: gamma1 is empty");
    require(kernels.size() == std::size_t(M - 1), "chain: expected M-1 interior kernels");
    double tot = 0.0;
    for (double x : gamma1.w) {
        require(x >= 0.0, "chain: gamma1 has a negative entry");
        tot += x;
    }
    require(tot > 0.0, "chain: gamma1 has zero mass");
    require(tot <= 1.0 + kRowSlack, "chain: gamma1 mass exceeds one");
    std::size_t prev = gamma1.size();
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        const SubKernel& P = kernels[k];
        require(P.rows == prev, "chain: kernel " + std::to_string(k + 2) + " row count mismatch");
        require(P.cols >= 1, "chain: kernel " + std::to_string(k + 2) + " has no columns");
        for (std::size_t i = 0; i < P.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < P.cols; ++j) {
                require(P(i, j) >= 0.0, "chain: kernel " + std::to_string(k + 2) + " has a negative entry");
                s += P(i, j);
            }
            require(s <= 1.0 + kRowSlack, "chain: kernel " + std::to_string(k + 2) + " row sum exceeds one");
        }
        prev = P.cols;
    }
    require(fM.size() == prev, "chain: fM length mismatch");
    for (double x : fM.v)
        require(x >= 0.0 && x <= 1.0 + kRowSlack, "chain: fM entry outside [0,1]");
}

std::size_t ChainSpec::level_size(int k) const {
    require(k >= 1 && k <= M, "chain: level index out of range");
    if (k == 1) return gamma1.size();
    return kernels[std::size_t(k - 2)].cols;
}

KernelChain::KernelChain(const ChainSpec& spec) : M_(spec.M) {
    spec.validate();
    kernels_.resize(std::size_t(M_) + 2);

    SubKernel entry(1, spec.gamma1.size());
    entry.a = spec.gamma1.w;
    kernels_[1] = std::move(entry);
    for (int k = 2; k <= M_; ++k) kernels_[std::size_t(k)] = spec.kernels[std::size_t(k - 2)];
    SubKernel exit(spec.fM.size(), 1);
    exit.a = spec.fM.v;
    kernels_[std::size_t(M_) + 1] = std::move(exit);

    sizes_.resize(std::size_t(M_) + 2);
    sizes_[0] = 1;
    for (int k = 1; k <= M_ + 1; ++k) sizes_[std::size_t(k)] = kernels_[std::size_t(k)].cols;

    gammas_.resize(std::size_t(M_) + 2);
    gammas_[0] = Measure({1.0});
    for (int k = 1; k <= M_ + 1; ++k)
        gammas_[std::size_t(k)] = push(gammas_[std::size_t(k - 1)], kernels_[std::size_t(k)]);

    fs_.resize(std::size_t(M_) + 2);
    fs_[std::size_t(M_) + 1] = LevelFn(1, 1.0);
    for (int k = M_; k >= 0; --k)
        fs_[std::size_t(k)] = apply(kernels_[std::size_t(k + 1)], fs_[std::size_t(k + 1)]);

    gs_.resize(std::size_t(M_) + 1);
    for (int k = 0; k <= M_; ++k) gs_[std::size_t(k)] = kernels_[std::size_t(k + 1)].row_sums();
}

Measure KernelChain::mu(int k) const { return normalize(gammas_[std::size_t(k)]); }

SubKernel KernelChain::composite(int p, int n) const {
    require(0 <= p && p <= n && n <= M_ + 1, "chain: composite range out of bounds");
    SubKernel out(sizes_[std::size_t(p)], sizes_[std::size_t(p)]);
    for (std::size_t i = 0; i < out.rows; ++i) out(i, i) = 1.0;
    for (int k = p + 1; k <= n; ++k) {
        const SubKernel& P = kernels_[std::size_t(k)];
        SubKernel next(out.rows, P.cols);
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < P.cols; ++j) {
                Accum s;
                for (std::size_t l = 0; l < P.rows; ++l) s.add(out(i, l) * P(l, j));
                next(i, j) = s.value();
            }
        out = std::move(next);
    }
    return out;
}

LevelFn apply(const SubKernel& P, const LevelFn& f) {
    require(f.size() == P.cols, "chain: function length does not match kernel columns");
    LevelFn out(P.rows, 0.0);
    for (std::size_t i = 0; i < P.rows; ++i) {
        Accum s;
        for (std::size_t j = 0; j < P.cols; ++j) s.add(P(i, j) * f[j]);
        out[i] = s.value();
    }
    return out;
}

Measure push(const Measure& gamma, const SubKernel& P) {
    require(gamma.size() == P.rows, "chain: measure length does not match kernel rows");
    Measure out(std::vector<double>(P.cols, 0.0));
    for (std::size_t j = 0; j < P.cols; ++j) {
        Accum s;
        for (std::size_t i = 0; i < P.rows; ++i) s.add(gamma[i] * P(i, j));
        out[j] = s.value();
    }
    return out;
}

double value(const Measure& gamma, const LevelFn& f) {
    require(gamma.size() == f.size(), "chain: measure/function length mismatch");
    Accum s;
    for (std::size_t i = 0; i < gamma.size(); ++i) s.add(gamma[i] * f[i]);
    return s.value();
}

TransportResult transport(const Measure& gamma, const LevelFn& f_next, const SubKernel& P) {
    TransportResult r;
    r.gamma_next = push(gamma, P);
    r.f_prev = apply(P, f_next);
    r.g = P.row_sums();
    return r;
}

Measure normalize(const Measure& gamma) {
    double tot = gamma.total();
    require(tot > 0.0, "chain: cannot normalize a zero measure");
    Measure out = gamma;
    for (double& x : out.w) x /= tot;
    return out;
}

SubKernel normalize_kernel(const SubKernel& P) {
    SubKernel Q = P;
    LevelFn g = P.row_sums();
    for (std::size_t i = 0; i < P.rows; ++i) {
        if (g[i] <= 0.0) {
            for (std::size_t j = 0; j < P.cols; ++j) Q(i, j) = 0.0;
            continue;
        }
        for (std::size_t j = 0; j < P.cols; ++j) Q(i, j) = P(i, j) / g[i];
    }
    return Q;
}

LevelFn gamma_op(const SubKernel& P, const LevelFn& f, const LevelFn& g) {
    require(f.size() == P.cols && g.size() == P.cols, "chain: gamma_op length mismatch");
    LevelFn fg(P.cols, 0.0);
    for (std::size_t j = 0; j < P.cols; ++j) fg[j] = f[j] * g[j];
    LevelFn a = apply(P, fg);
    LevelFn b = apply(P, f);
    LevelFn c = apply(P, g);
    LevelFn out(P.rows, 0.0);
    for (std::size_t i = 0; i < P.rows; ++i) out[i] = a[i] - b[i] * c[i];
    return out;
}

LevelFn gamma_op(const SubKernel& P, const LevelFn& f) { return gamma_op(P, f, f); }

namespace {

// Two-term recursion for the iterated covariance operator.
LevelFn iter_recursive(const KernelChain& ch, int k, int n, const LevelFn& f, const LevelFn& g) {
    if (n == 0) {
        LevelFn out(f.size(), 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] * g[i];
        return out;
    }
    LevelFn inner = iter_recursive(ch, k, n - 1, f, g);
    LevelFn lead = apply(ch.kernel(k - n + 1), inner);
    LevelFn pf = apply(ch.kernel(k), f);
    LevelFn pg = apply(ch.kernel(k), g);
    LevelFn tail = iter_recursive(ch, k - 1, n - 1, pf, pg);
    LevelFn out(lead.size(), 0.0);
    for (std::size_t i = 0; i < lead.size(); ++i) out[i] = lead[i] - tail[i];
    return out;
}

// Signed binomial expansion over composite blocks, symmetric case only.
LevelFn iter_closed(const KernelChain& ch, int k, int n, const LevelFn& f) {
    LevelFn out(ch.size(k - n), 0.0);
    for (int i = 0; i <= n; ++i) {
        LevelFn h = apply(ch.composite(k - i, k), f);
        LevelFn h2(h.size(), 0.0);
        for (std::size_t j = 0; j < h.size(); ++j) h2[j] = h[j] * h[j];
        LevelFn term = apply(ch.composite(k - n, k - i), h2);
        double c = binom_coeff(n, i) * ((i % 2 == 0) ? 1.0 : -1.0);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * term[j];
    }
    return out;
}

}  // namespace

LevelFn gamma_op_iter(const KernelChain& chain, int k, int n, const LevelFn& f) {
    require(k >= 0 && k <= chain.M() + 1, "chain: gamma_op_iter level out of range");
    require(n >= 0 && n <= k, "chain: gamma_op_iter order out of range");
    require(f.size() == chain.size(k), "chain: gamma_op_iter function length mismatch");
    LevelFn rec = iter_recursive(chain, k, n, f, f);
    LevelFn cl = iter_closed(chain, k, n, f);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        if (!close_rel(rec[i], cl[i], 1e-12, 1e-14))
            throw std::runtime_error("chain: iterated covariance routes disagree");
    }
    return rec;
}

LevelFn gamma_op_iter(const ChainSpec& spec, int k, int n, const LevelFn& f) {
    KernelChain ch(spec);
    return gamma_op_iter(ch, k, n, f);
}

double chain_probability(const KernelChain& chain) {
    double p0 = chain.p();
    for (int k = 0; k <= chain.M() + 1; ++k) {
        double pk = value(chain.gamma(k), chain.f(k));
        if (!close_rel(pk, p0, 1e-12, 1e-14))
            throw std::runtime_error("chain: level evaluations of the reach probability disagree");
    }
    return p0;
}

double chain_probability(const ChainSpec& spec) {
    KernelChain ch(spec);
    return chain_probability(ch);
}

}  // namespace msplit
