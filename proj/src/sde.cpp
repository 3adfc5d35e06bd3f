#include "msplit/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "msplit/conformal.hpp"
#include "msplit/rng.hpp"

namespace msplit {

namespace {

const double kTwoPi = 2.0 * std::acos(-1.0);
constexpr double kNoCrossing = std::numeric_limits<double>::infinity();

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Smallest t in (0, 1] at which the segment p + t*d enters the disk of
// radius k around the origin; infinity when it stays outside.
double segment_disk_entry(Vec2 p, Vec2 d, double k) {
    const double a = d.x * d.x + d.y * d.y;
    if (a == 0.0) return kNoCrossing;
    const double b = 2.0 * (p.x * d.x + p.y * d.y);
    const double c = p.x * p.x + p.y * p.y - k * k;
    if (c <= 0.0) return 0.0;  // already inside
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return kNoCrossing;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    return (t > 0.0 && t <= 1.0) ? t : kNoCrossing;
}

double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    return t;
}

bool segments_intersect_simple(std::pair<double, double> a, std::pair<double, double> b,
                               std::pair<double, double> c, std::pair<double, double> d) {
    auto orient = [](std::pair<double, double> p, std::pair<double, double> q,
                     std::pair<double, double> r) {
        return (q.first - p.first) * (r.second - p.second) -
               (q.second - p.second) * (r.first - p.first);
    };
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}

}  // namespace

void OUConfig::validate() const {
    require(std::isfinite(lambda1) && std::isfinite(lambda2) && lambda2 >= 0.0 &&
                lambda1 >= lambda2,
            "ou: need lambda1 >= lambda2 >= 0");
    require(std::isfinite(sigma) && sigma >= 0.0, "ou: sigma must be >= 0");
    require(std::isfinite(dt) && dt > 0.0, "ou: dt must be > 0");
    require(std::isfinite(kill_radius) && kill_radius > 0.0, "ou: kill_radius must be > 0");
    require(std::isfinite(x0.x) && std::isfinite(x0.y), "ou: x0 must be finite");
    require(max_steps >= 1, "ou: max_steps must be >= 1");
}

Boundary Boundary::circle(double radius, Vec2 center) {
    require(std::isfinite(radius) && radius > 0.0, "boundary: circle radius must be > 0");
    Boundary b;
    b.kind_ = Kind::circle;
    b.radius_ = radius;
    b.center_ = center;
    b.perim_ = kTwoPi * radius;
    const double off = std::hypot(center.x, center.y);
    b.rmin_ = std::max(0.0, radius - off);
    b.rmax_ = radius + off;
    return b;
}

Boundary Boundary::polyline(std::vector<std::pair<double, double>> points) {
    if (!points.empty() && points.front() == points.back()) points.pop_back();
    require(points.size() >= 3, "boundary: polyline needs at least 3 distinct points");
    for (const auto& p : points)
        require(std::isfinite(p.first) && std::isfinite(p.second),
                "boundary: polyline points must be finite");

    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;
            require(!segments_intersect_simple(points[i], points[(i + 1) % n], points[j],
                                               points[(j + 1) % n]),
                    "boundary: polyline self-intersects");
        }

    Boundary b;
    b.kind_ = Kind::polyline;
    b.pts_ = std::move(points);
    b.cum_.assign(n + 1, 0.0);
    b.rmin_ = std::numeric_limits<double>::infinity();
    b.rmax_ = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = b.pts_[i];
        const auto& q = b.pts_[(i + 1) % n];
        b.cum_[i + 1] = b.cum_[i] + std::hypot(q.first - p.first, q.second - p.second);
        // closest approach of this edge to the origin
        const double vx = q.first - p.first;
        const double vy = q.second - p.second;
        const double len2 = vx * vx + vy * vy;
        double t = len2 > 0.0 ? -(p.first * vx + p.second * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        b.rmin_ = std::min(b.rmin_, std::hypot(p.first + t * vx, p.second + t * vy));
        b.rmax_ = std::max(b.rmax_, std::hypot(p.first, p.second));
    }
    b.perim_ = b.cum_[n];
    require(b.perim_ > 0.0, "boundary: polyline has zero length");
    return b;
}

bool Boundary::contains(Vec2 p) const {
    if (kind_ == Kind::circle)
        return std::hypot(p.x - center_.x, p.y - center_.y) < radius_;
    bool inside = false;
    const std::size_t n = pts_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double yi = pts_[i].second, yj = pts_[j].second;
        const double xi = pts_[i].first, xj = pts_[j].first;
        if (((yi > p.y) != (yj > p.y)) && (p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi))
            inside = !inside;
    }
    return inside;
}

bool Boundary::first_crossing(Vec2 a, Vec2 b, double& t, double& angle, Vec2& where) const {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (kind_ == Kind::circle) {
        const double px = a.x - center_.x;
        const double py = a.y - center_.y;
        const double qa = dx * dx + dy * dy;
        const double qc = px * px + py * py - radius_ * radius_;
        if (qc >= 0.0) {  // started on or outside: immediate exit
            t = 0.0;
            where = a;
            angle = wrap_angle(std::atan2(py, px));
            return true;
        }
        if (qa == 0.0) return false;
        const double qb = 2.0 * (px * dx + py * dy);
        const double disc = qb * qb - 4.0 * qa * qc;
        const double root = (-qb + std::sqrt(disc)) / (2.0 * qa);
        if (root > 1.0) return false;
        t = std::max(root, 0.0);
        where = Vec2{a.x + t * dx, a.y + t * dy};
        angle = wrap_angle(std::atan2(where.y - center_.y, where.x - center_.x));
        return true;
    }

    // Quick reject: the segment stays strictly closer to the origin than
    // any point of the curve.
    if (std::max(std::hypot(a.x, a.y), std::hypot(b.x, b.y)) < rmin_) return false;

    const std::size_t n = pts_.size();
    double best = kNoCrossing;
    double best_s = 0.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = pts_[i];
        const auto& q = pts_[(i + 1) % n];
        const double ex = q.first - p.first;
        const double ey = q.second - p.second;
        const double denom = cross2(dx, dy, ex, ey);
        if (denom == 0.0) continue;
        const double rx = p.first - a.x;
        const double ry = p.second - a.y;
        const double tt = cross2(rx, ry, ex, ey) / denom;
        const double ss = cross2(rx, ry, dx, dy) / denom;
        if (tt > 0.0 && tt <= 1.0 && ss >= 0.0 && ss <= 1.0 && tt < best) {
            best = tt;
            best_s = ss;
            best_i = i;
        }
    }
    if (best == kNoCrossing) return false;
    t = best;
    where = Vec2{a.x + t * dx, a.y + t * dy};
    const double seg_len = cum_[best_i + 1] - cum_[best_i];
    angle = wrap_angle(kTwoPi * (cum_[best_i] + best_s * seg_len) / perim_);
    return true;
}

double Boundary::nearest_parameter(Vec2 p) const {
    if (kind_ == Kind::circle)
        return wrap_angle(std::atan2(p.y - center_.y, p.x - center_.x));
    const std::size_t n = pts_.size();
    double best = std::numeric_limits<double>::infinity();
    double param = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& u = pts_[i];
        const auto& v = pts_[(i + 1) % n];
        const double vx = v.first - u.first;
        const double vy = v.second - u.second;
        const double len2 = vx * vx + vy * vy;
        double s = len2 > 0.0 ? ((p.x - u.first) * vx + (p.y - u.second) * vy) / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        const double d = std::hypot(p.x - u.first - s * vx, p.y - u.second - s * vy);
        if (d < best) {
            best = d;
            param = kTwoPi * (cum_[i] + s * (cum_[i + 1] - cum_[i])) / perim_;
        }
    }
    return wrap_angle(param);
}

HitRecord simulate_first_hit_from(const OUConfig& cfg, const Boundary& boundary, Vec2 start,
                                  std::mt19937_64& rng) {
    if (std::hypot(start.x, start.y) <= cfg.kill_radius)
        return HitRecord{HitOutcome::killed, start, 0.0, 0};
    if (!boundary.contains(start))
        return HitRecord{HitOutcome::hit_boundary, start, boundary.nearest_parameter(start), 0};

    std::normal_distribution<double> gauss(0.0, 1.0);
    const double keep1 = 1.0 - cfg.lambda1 * cfg.dt;
    const double keep2 = 1.0 - cfg.lambda2 * cfg.dt;
    const double noise = cfg.sigma * std::sqrt(cfg.dt);

    Vec2 x = start;
    for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
        const Vec2 next{keep1 * x.x + noise * gauss(rng), keep2 * x.y + noise * gauss(rng)};
        const Vec2 d{next.x - x.x, next.y - x.y};

        const double t_kill = segment_disk_entry(x, d, cfg.kill_radius);
        double t_hit;
        double angle;
        Vec2 where;
        const bool hits = boundary.first_crossing(x, next, t_hit, angle, where);

        if (hits && t_hit <= t_kill)
            return HitRecord{HitOutcome::hit_boundary, where, angle, step};
        if (t_kill <= 1.0) {
            const Vec2 kp{x.x + t_kill * d.x, x.y + t_kill * d.y};
            return HitRecord{HitOutcome::killed, kp, wrap_angle(std::atan2(kp.y, kp.x)), step};
        }
        x = next;
    }
    return HitRecord{HitOutcome::budget_capped, x, 0.0, cfg.max_steps};
}

HitRecord simulate_first_hit(const OUConfig& cfg, const Boundary& boundary,
                             std::mt19937_64& rng) {
    cfg.validate();
    return simulate_first_hit_from(cfg, boundary, cfg.x0, rng);
}

namespace {

struct Wave {
    std::int64_t launched = 0, hits = 0, killed = 0, capped = 0;
    std::vector<double> params;  // boundary parameter of each hit, launch order
    std::vector<Vec2> points;    // hit locations, launch order
};

Wave run_wave(const OUConfig& cfg, const Boundary& boundary, const std::vector<Vec2>& starts,
              std::uint64_t stage, std::uint64_t phase, int threads, bool& off_course) {
    const std::int64_t n = static_cast<std::int64_t>(starts.size());
    std::vector<HitRecord> rec(starts.size());
    int flagged = 0;

    auto body = [&](std::int64_t j) -> int {
        const Vec2 s = starts[std::size_t(j)];
        const bool misplaced =
            std::hypot(s.x, s.y) <= cfg.kill_radius || !boundary.contains(s);
        std::mt19937_64 rng = substream(cfg.seed, stage, phase, std::uint64_t(j));
        rec[std::size_t(j)] = simulate_first_hit_from(cfg, boundary, s, rng);
        return misplaced ? 1 : 0;
    };

#ifdef _OPENMP
    int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt) reduction(+ : flagged)
    for (std::int64_t j = 0; j < n; ++j) flagged += body(j);
#else
    (void)threads;
    for (std::int64_t j = 0; j < n; ++j) flagged += body(j);
#endif
    if (flagged > 0) off_course = true;

    Wave w;
    w.launched = n;
    for (const HitRecord& r : rec) {
        switch (r.outcome) {
            case HitOutcome::hit_boundary:
                ++w.hits;
                w.params.push_back(r.hit_angle);
                w.points.push_back(r.hit_point);
                break;
            case HitOutcome::killed: ++w.killed; break;
            case HitOutcome::budget_capped: ++w.capped; break;
        }
    }
    return w;
}

double ks_of_params(const std::vector<double>& params) {
    if (params.empty()) return 0.0;
    std::vector<double> u;
    u.reserve(params.size());
    for (double p : params) u.push_back(p / kTwoPi);
    return ks_statistic(std::move(u));
}

std::vector<std::pair<double, double>> density_curve_of(const DensityEstimate& d, int m) {
    std::vector<std::pair<double, double>> curve;
    curve.reserve(std::size_t(m));
    for (int i = 0; i < m; ++i) {
        const double theta = kTwoPi * i / m;
        curve.emplace_back(theta, d(theta));
    }
    return curve;
}

std::vector<Vec2> duplicated(const std::vector<Vec2>& pts, std::int64_t r) {
    std::vector<Vec2> out;
    out.reserve(pts.size() * std::size_t(r));
    for (const Vec2& p : pts)
        for (std::int64_t c = 0; c < r; ++c) out.push_back(p);
    return out;
}

}  // namespace

StagedReport run_ou_pipeline(const OUConfig& cfg, std::array<double, 3> radii, std::int64_t N,
                             std::array<std::int64_t, 2> R, const PipelineOptions& options) {
    cfg.validate();
    require(radii[0] > 0.0 && radii[0] < radii[1] && radii[1] < radii[2],
            "pipeline: radii must be positive and strictly increasing");
    require(radii[0] > cfg.kill_radius, "pipeline: radii must enclose the kill disk");
    require(N >= 1, "pipeline: N must be >= 1");
    require(R[0] >= 1 && R[1] >= 1, "pipeline: splitting factors must be >= 1");
    const double r0 = std::hypot(cfg.x0.x, cfg.x0.y);
    require(r0 > cfg.kill_radius && r0 < radii[0],
            "pipeline: x0 must lie between the kill disk and the first threshold");

    StagedReport report;
    report.conditional.assign(3, 0.0);

    // Carriers of the surviving empirical measure between stages.
    std::vector<Vec2> carriers;
    std::int64_t carried = 0;

    for (int stage = 1; stage <= 3; ++stage) {
        StageReport sr;
        sr.index = stage;
        const double radius = radii[std::size_t(stage - 1)];
        const Boundary circle = Boundary::circle(radius);
        const bool deform_here = options.deform && stage < 3;

        std::vector<Vec2> starts;
        std::int64_t launched = 0;
        if (stage == 1) {
            starts.assign(std::size_t(N), cfg.x0);
            launched = N;
        } else {
            const std::int64_t r = R[std::size_t(stage - 2)];
            starts = duplicated(carriers, r);
            launched = carried * r;
        }

        const Wave pre = run_wave(cfg, circle, starts, std::uint64_t(stage), 0,
                                  options.threads, report.containment_warning);
        sr.launched_pre = pre.launched;
        sr.hits_pre = pre.hits;
        sr.killed_pre = pre.killed;
        sr.capped_pre = pre.capped;
        sr.hit_angles_pre = pre.params;
        sr.ks_pre = ks_of_params(pre.params);
        if (pre.params.size() >= 2) {
            sr.kappa = select_kappa(pre.params);
            sr.density_curve =
                density_curve_of(occupancy_density(pre.params, sr.kappa),
                                 options.density_samples);
        }

        if (!deform_here) {
            carriers = pre.points;
            carried = pre.hits;
            report.stages.push_back(std::move(sr));
            if (carried == 0) {
                report.extinct = true;
                report.extinct_stage = stage;
                return report;
            }
            report.conditional[std::size_t(stage - 1)] =
                double(carried) / double(launched);
            continue;
        }

        if (pre.hits < 2) {  // cannot estimate a density, let alone deform
            report.stages.push_back(std::move(sr));
            report.extinct = true;
            report.extinct_stage = stage;
            return report;
        }

        // A sharply concentrated estimate can make the equalizing map lose
        // injectivity (a self-crossing image) or pinch so far inward that
        // the staged thresholds stop nesting. Blend the density toward
        // uniform until the image is a simple curve that clears the kill
        // disk, stays inside the next threshold and strictly contains
        // every point the following wave starts from; full blend gives a
        // rigid map, so the ladder always lands.
        const DensityEstimate dens = occupancy_density(pre.params, sr.kappa);
        const std::vector<Vec2> support =
            stage == 1 ? std::vector<Vec2>{cfg.x0} : carriers;
        const double next_radius = radii[std::size_t(stage)];
        std::optional<Boundary> omega;
        for (double t : {0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0}) {
            BoundaryDensity bd;
            bd.radius = radius;
            bd.h = [dens, t](double theta) {
                return (1.0 - t) * dens(theta) + t / kTwoPi;
            };
            const ConformalMap candidate(bd, options.n_q);
            try {
                Boundary image = Boundary::polyline(
                    boundary_image(candidate, options.boundary_points).points);
                const bool nested =
                    image.rmin() > cfg.kill_radius && image.rmax() < next_radius &&
                    std::all_of(support.begin(), support.end(),
                                [&](Vec2 p) { return image.contains(p); });
                if (nested) {
                    omega = std::move(image);
                    sr.uniform_blend = t;
                    break;
                }
            } catch (const config_error&) {
                // self-intersecting image: climb to the next blend
            }
        }
        require(omega.has_value(), "pipeline: no admissible deformation found");
        sr.image_boundary = omega->points();

        std::vector<Vec2> fresh;
        if (stage == 1) {
            fresh.assign(std::size_t(N), cfg.x0);
        } else {
            // Fresh set restarted from the previous threshold: resample the
            // empirical hit distribution carried on it.
            std::mt19937_64 rs = substream(cfg.seed, std::uint64_t(stage), 2);
            std::uniform_int_distribution<std::size_t> pick(0, carriers.size() - 1);
            fresh.reserve(std::size_t(launched));
            for (std::int64_t j = 0; j < launched; ++j) fresh.push_back(carriers[pick(rs)]);
        }

        const Wave post = run_wave(cfg, *omega, fresh, std::uint64_t(stage), 1,
                                   options.threads, report.containment_warning);
        sr.deformed = true;
        sr.launched_post = post.launched;
        sr.hits_post = post.hits;
        sr.killed_post = post.killed;
        sr.capped_post = post.capped;
        sr.hit_params_post = post.params;
        sr.ks_post = ks_of_params(post.params);
        if (post.params.size() >= 2) {
            sr.kappa_post = select_kappa(post.params);
            sr.post_density_curve =
                density_curve_of(occupancy_density(post.params, sr.kappa_post),
                                 options.density_samples);
        }

        carriers = post.points;
        carried = post.hits;
        report.stages.push_back(std::move(sr));
        if (carried == 0) {
            report.extinct = true;
            report.extinct_stage = stage;
            return report;
        }
        report.conditional[std::size_t(stage - 1)] = double(carried) / double(launched);
    }

    report.p_hat =
        report.conditional[0] * report.conditional[1] * report.conditional[2];
    return report;
}

}  // namespace msplit
