#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "msplit/stats.hpp"
#include "msplit/types.hpp"

namespace msplit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Planar Ornstein-Uhlenbeck diffusion dX = -diag(lambda1, lambda2) X dt
// + sigma dW, killed on the disk of radius kill_radius around the origin.
struct OUConfig {
    double lambda1 = 1.0;
    double lambda2 = 0.2;
    double sigma = 0.3;
    Vec2 x0{0.05, 0.0};
    double dt = 0.01;
    double kill_radius = 0.01;
    std::uint64_t seed = 0;
    std::int64_t max_steps = 10'000'000;

    void validate() const;
};

// Absorbing outer threshold: a circle, or a closed simple polyline around
// the origin (typically a deformed circle produced by a conformal map).
class Boundary {
  public:
    enum class Kind { circle, polyline };

    static Boundary circle(double radius, Vec2 center = {0.0, 0.0});
    static Boundary polyline(std::vector<std::pair<double, double>> points);

    Kind kind() const { return kind_; }
    double radius() const { return radius_; }
    Vec2 center() const { return center_; }
    const std::vector<std::pair<double, double>>& points() const { return pts_; }
    double perimeter() const { return perim_; }
    double rmin() const { return rmin_; }
    double rmax() const { return rmax_; }

    bool contains(Vec2 p) const;

    // First exit of the segment a -> b through the curve, as the smallest
    // parameter t in (0, 1].  Fills the crossing point and the boundary
    // parameter in [0, 2pi) (angle for circles, scaled arc length for
    // polylines).  Returns false when the segment stays inside.
    bool first_crossing(Vec2 a, Vec2 b, double& t, double& angle, Vec2& where) const;

    double nearest_parameter(Vec2 p) const;

  private:
    Boundary() = default;

    Kind kind_ = Kind::circle;
    double radius_ = 0.0;
    Vec2 center_{};
    std::vector<std::pair<double, double>> pts_;
    std::vector<double> cum_;
    double perim_ = 0.0;
    double rmin_ = 0.0;
    double rmax_ = 0.0;
};

enum class HitOutcome { hit_boundary, killed, budget_capped };

struct HitRecord {
    HitOutcome outcome = HitOutcome::budget_capped;
    Vec2 hit_point{};
    double hit_angle = 0.0;
    std::int64_t steps = 0;
};

HitRecord simulate_first_hit(const OUConfig& cfg, const Boundary& boundary,
                             std::mt19937_64& rng);

// Same walk from an explicit start point (used by the staged pipeline,
// where particles resume from the previous threshold).
HitRecord simulate_first_hit_from(const OUConfig& cfg, const Boundary& boundary, Vec2 start,
                                  std::mt19937_64& rng);

struct PipelineOptions {
    bool deform = true;       // build conformal maps and re-run on the images
    int n_q = 256;            // quadrature grid for each map
    int boundary_points = 512;
    int density_samples = 256;
    int threads = 0;          // 0 = library default
};

struct StageReport {
    int index = 0;
    bool deformed = false;
    std::int64_t launched_pre = 0, hits_pre = 0, killed_pre = 0, capped_pre = 0;
    std::int64_t launched_post = 0, hits_post = 0, killed_post = 0, capped_post = 0;
    double kappa = 0.0;       // kernel concentration for the pre-map density
    double kappa_post = 0.0;
    // Fraction of uniform density blended in before building the map.
    // Zero means the raw estimate already produced a simple curve; the
    // ladder climbs toward one (a rigid map) until it does.
    double uniform_blend = 0.0;
    double ks_pre = 0.0;      // uniformity of hit parameters before the map
    double ks_post = 0.0;     // and after it
    std::vector<double> hit_angles_pre;
    std::vector<double> hit_params_post;
    std::vector<std::pair<double, double>> density_curve;       // (theta, density)
    std::vector<std::pair<double, double>> post_density_curve;  // on the image
    std::vector<std::pair<double, double>> image_boundary;      // deformed curve, closed
};

struct StagedReport {
    std::vector<StageReport> stages;
    std::vector<double> conditional;  // per-stage success fractions
    double p_hat = 0.0;
    bool extinct = false;
    int extinct_stage = 0;  // 1-based; 0 when the run completed
    bool containment_warning = false;
};

StagedReport run_ou_pipeline(const OUConfig& cfg, std::array<double, 3> radii, std::int64_t N,
                             std::array<std::int64_t, 2> R,
                             const PipelineOptions& options = {});

}  // namespace msplit
