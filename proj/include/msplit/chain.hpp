#pragma once

#include <vector>

#include "msplit/types.hpp"

namespace msplit {

// Static description of a nested-event chain with M intermediate
// frontiers. Entry measure gamma1 puts mass on the subsets of the first
// frontier, kernels[k] moves mass from frontier k+1 to frontier k+2
// (so the list has M-1 blocks), and fM holds the per-subset probability
// of reaching the target from the last frontier.
struct ChainSpec {
    int M = 0;
    Measure gamma1;
    std::vector<SubKernel> kernels;
    LevelFn fM;

    void validate() const;
    std::size_t level_size(int k) const;  // subsets on frontier k, 1 <= k <= M
};

// Uniform view of the same chain as M+1 transition blocks between levels
// 0..M+1: block 1 is gamma1 read as a 1 x s_1 kernel out of the start
// point, blocks 2..M are the interior kernels, and block M+1 is fM read
// as an s_M x 1 kernel into the target. Level 0 and level M+1 both carry
// a single subset, which lets every identity below run over one index
// range with no edge cases. Entry and exit measures/functions are cached.
class KernelChain {
public:
    explicit KernelChain(const ChainSpec& spec);

    int M() const { return M_; }
    std::size_t size(int level) const { return sizes_[level]; }

    // Transition block k maps functions on level k to functions on level
    // k-1 and measures on level k-1 to measures on level k; 1 <= k <= M+1.
    const SubKernel& kernel(int k) const { return kernels_[k]; }

    const Measure& gamma(int k) const { return gammas_[k]; }   // 0 <= k <= M+1
    const LevelFn& f(int k) const { return fs_[k]; }           // 0 <= k <= M+1
    const LevelFn& g(int k) const { return gs_[k]; }           // 0 <= k <= M

    double p() const { return fs_[0][0]; }
    Measure mu(int k) const;  // gamma(k) scaled to mass one

    // Product of blocks p+1..n, mapping level-n functions to level-p ones.
    SubKernel composite(int p, int n) const;

private:
    int M_;
    std::vector<std::size_t> sizes_;
    std::vector<SubKernel> kernels_;
    std::vector<Measure> gammas_;
    std::vector<LevelFn> fs_;
    std::vector<LevelFn> gs_;
};

// P f: pull a function one level back through a transition block.
LevelFn apply(const SubKernel& P, const LevelFn& f);

// gamma P: push a measure one level forward through a transition block.
Measure push(const Measure& gamma, const SubKernel& P);

// gamma(f): integrate a function against a measure on the same frontier.
double value(const Measure& gamma, const LevelFn& f);

struct TransportResult {
    Measure gamma_next;  // gamma P
    LevelFn f_prev;      // P f
    LevelFn g;           // P 1, the survival probabilities of the step
};

// One step of the forward/backward recursion: moves the occupation
// measure forward and the success function backward through one block.
TransportResult transport(const Measure& gamma, const LevelFn& f_next, const SubKernel& P);

// Scale a nonzero measure to total mass one.
Measure normalize(const Measure& gamma);

// Row-normalize a sub-stochastic block. Rows with zero survival mass are
// left identically zero; simulation refuses to draw from such a row.
SubKernel normalize_kernel(const SubKernel& P);

// Gamma(f, g) = P(fg) - P(f) P(g), the one-step covariance operator.
LevelFn gamma_op(const SubKernel& P, const LevelFn& f, const LevelFn& g);
LevelFn gamma_op(const SubKernel& P, const LevelFn& f);

// n-fold iterate of the covariance operator applied to a function on
// frontier k, landing on frontier k-n. Evaluated independently by the
// two-term recursion and by the signed binomial expansion over composite
// blocks; the routes must agree to 1e-12 relative (1e-14 floor) or the
// call refuses the result.
LevelFn gamma_op_iter(const ChainSpec& spec, int k, int n, const LevelFn& f);
LevelFn gamma_op_iter(const KernelChain& chain, int k, int n, const LevelFn& f);

// Reach probability of the chain. Computed as gamma_k(f_k) on every
// level 0..M+1; the evaluations must agree to 1e-12 relative, and the
// level-0 value is returned.
double chain_probability(const ChainSpec& spec);
double chain_probability(const KernelChain& chain);

}  // namespace msplit
