#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msplit {

// Neumaier-compensated accumulator. Sums of reciprocal replication counts
// and of many small per-level contributions are formed with this so that
// cancellation between nearly equal terms does not pollute tight
// cross-checks between independently derived formulas.
class Accum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Nonnegative measure on the finite partition of one frontier. Entry i is
// the mass sitting on subset i jointly with the walk having survived this
// far, so the total mass is at most 1 and shrinks level by level.
struct Measure {
    std::vector<double> w;

    Measure() = default;
    explicit Measure(std::vector<double> v) : w(std::move(v)) {}

    std::size_t size() const { return w.size(); }
    double operator[](std::size_t i) const { return w[i]; }
    double& operator[](std::size_t i) { return w[i]; }

    double total() const {
        Accum a;
        for (double x : w) a.add(x);
        return a.value();
    }
};

// Real-valued function on the subsets of one frontier (a column vector).
struct LevelFn {
    std::vector<double> v;

    LevelFn() = default;
    explicit LevelFn(std::vector<double> x) : v(std::move(x)) {}
    LevelFn(std::initializer_list<double> x) : v(x) {}
    LevelFn(std::size_t n, double fill) : v(n, fill) {}

    std::size_t size() const { return v.size(); }
    double operator[](std::size_t i) const { return v[i]; }
    double& operator[](std::size_t i) { return v[i]; }
};

// Sub-stochastic transition block between two consecutive frontiers,
// stored row-major. Row i lists the probabilities of moving from subset i
// of the coarser frontier to each subset of the finer one; the missing
// row mass is the probability of dying on the way.
struct SubKernel {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    SubKernel() = default;
    SubKernel(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }

    // Row sums, i.e. the per-subset survival probabilities of this step.
    LevelFn row_sums() const {
        LevelFn g(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            Accum s;
            for (std::size_t j = 0; j < cols; ++j) s.add((*this)(i, j));
            g[i] = s.value();
        }
        return g;
    }
};

struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct infeasible_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw config_error(what);
}

}  // namespace msplit
