#pragma once

#include <complex>
#include <functional>
#include <utility>
#include <vector>

namespace msplit {

// Positive density (per unit angle, integrating to one) describing where
// particles land on the circle of the given radius.
struct BoundaryDensity {
    double radius = 1.0;
    std::function<double(double)> h;
};

// Holomorphic reshaping of the disk of radius `radius` so that mass
// distributed on its boundary per the density lands uniformly (in arc
// length) on the image boundary. Built once from boundary data on a
// uniform angular grid; evaluation is pure.
//
// Internally the map lives on the unit disk: phi solves the Dirichlet
// problem for log of the target speed via the Schwarz kernel, and the
// image map integrates exp(phi) from the center. Boundary values of phi
// use the radial limit at 1 - eps, eps = 10/grid; positions still run to
// the true boundary, so the frozen last sliver contributes only a
// second-order error.
class ConformalMap {
public:
    // target_perimeter <= 0 picks the default 2 pi radius (the image
    // keeps the length of the source circle).
    ConformalMap(const BoundaryDensity& density, int grid, double target_perimeter = 0.0);

    // Harmonic-conjugate pair at z in the source disk (|z| < radius).
    std::complex<double> phi(std::complex<double> z) const;

    // The deformation itself at z in the source disk.
    std::complex<double> map(std::complex<double> z) const;

    // Image of the source boundary point at angle theta.
    std::complex<double> boundary_point(double theta) const;

    // d(image arc length)/d theta at the source angle; equals the target
    // perimeter times the density up to quadrature error.
    double boundary_speed(double theta) const;

    // Arc-length position of the image of angle theta, normalized to [0,1).
    double arc_position(double theta) const;

    int grid() const { return nq_; }
    double radius() const { return l_; }
    double target_perimeter() const { return S_; }
    bool density_clamped() const { return clamped_; }

    // Average of the boundary data, which the map must reproduce as the
    // real part of phi at the center.
    double mean_boundary_log() const;

private:
    std::complex<double> phi_unit(std::complex<double> w) const;
    std::complex<double> map_unit(std::complex<double> w) const;

    int nq_ = 0;
    double l_ = 1.0;
    double S_ = 0.0;
    double eps_ = 0.0;
    bool clamped_ = false;
    std::vector<double> u_;      // log(S h) at the grid angles
    std::vector<double> cum_;    // cumulative image arc length on a fine grid
    double total_arc_ = 0.0;
};

struct BoundaryImage {
    std::vector<std::pair<double, double>> points;  // closed: first == last implied
    double perimeter = 0.0;
};

BoundaryImage boundary_image(const ConformalMap& m, int n_points);

// Kolmogorov-Smirnov distance from uniform of the arc-length positions
// of the sample angles pushed through the map.
double pushforward_uniformity(const ConformalMap& m, const std::vector<double>& angles);

}  // namespace msplit
