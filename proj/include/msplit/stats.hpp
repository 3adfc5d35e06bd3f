#pragma once

#include <cstddef>
#include <vector>

namespace msplit {

// Kolmogorov-Smirnov distance between samples on [0,1) and the uniform
// law. Takes a copy because it sorts.
double ks_statistic(std::vector<double> unit_samples);

// Asymptotic critical value c(alpha)/sqrt(n) for alpha in {0.05, 0.01}.
double ks_critical(double alpha, std::size_t n);

double von_mises_density(double theta, double mu, double kappa);

// Circular kernel density estimate: the average of von Mises bumps
// centered at the samples. Integrates to one exactly by construction.
struct DensityEstimate {
    double kappa = 0.0;
    std::vector<double> samples;
    double operator()(double theta) const;
};

DensityEstimate occupancy_density(const std::vector<double>& angles, double kappa);

// Concentration picked by maximizing the leave-one-out log-likelihood
// over a log-spaced grid.
double select_kappa(const std::vector<double>& angles);

}  // namespace msplit
