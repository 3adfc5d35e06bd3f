#pragma once

#include <cstdint>
#include <vector>

#include "msplit/types.hpp"

namespace msplit {

// Sampling plan: N independent starters and per-frontier duplication
// factors R_1..R_M applied to every survivor of the corresponding step.
struct Plan {
    std::int64_t N = 0;
    std::vector<std::int64_t> R;

    void validate(int M) const;

    // Cumulative replication counts r_0 = N, r_k = R_k r_{k-1}.
    std::vector<std::int64_t> counts(int M) const;
    std::vector<double> profile(int M) const;
};

}  // namespace msplit
