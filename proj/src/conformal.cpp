#include "msplit/conformal.hpp"

#include <cmath>

#include "msplit/stats.hpp"
#include "msplit/types.hpp"

namespace msplit {

namespace {

using cplx = std::complex<double>;

constexpr double kTwoPi = 6.283185307179586476925286766559;

template <class F>
cplx adapt_step(const F& f, double a, double b, cplx fa, cplx fm, cplx fb, cplx whole,
                double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const cplx flm = f(lm);
    const cplx frm = f(rm);
    const cplx left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const cplx right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const cplx delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adapt_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adapt_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson quadrature of a complex integrand, absolute tolerance.
template <class F>
cplx adaptive_simpson(const F& f, double a, double b, double tol) {
    const cplx fa = f(a);
    const cplx fm = f(0.5 * (a + b));
    const cplx fb = f(b);
    const cplx whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adapt_step(f, a, b, fa, fm, fb, whole, tol, 30);
}

}  // namespace

ConformalMap::ConformalMap(const BoundaryDensity& density, int grid, double target_perimeter) {
    require(grid >= 64, "conformal: boundary grid needs at least 64 nodes");
    require(density.radius > 0.0, "conformal: source radius must be positive");
    require(static_cast<bool>(density.h), "conformal: boundary density is empty");

    nq_ = grid;
    l_ = density.radius;
    S_ = target_perimeter > 0.0 ? target_perimeter : kTwoPi * l_;
    eps_ = 10.0 / static_cast<double>(nq_);
    require(eps_ < 1.0, "conformal: boundary grid too coarse for the radial limit");

    const double floor_h = 1e-8 / kTwoPi;
    u_.resize(static_cast<std::size_t>(nq_));
    Accum mass;
    for (int j = 0; j < nq_; ++j) {
        const double theta = kTwoPi * j / nq_;
        double hj = density.h(theta);
        require(std::isfinite(hj) && hj >= 0.0,
                "conformal: boundary density must be finite and nonnegative");
        if (hj < floor_h) {
            hj = floor_h;
            clamped_ = true;
        }
        mass.add(hj);
        u_[static_cast<std::size_t>(j)] = std::log(S_ * hj);
    }
    const double total = mass.value() * kTwoPi / nq_;
    require(std::abs(total - 1.0) <= 1e-6,
            "conformal: boundary density must integrate to one over the circle");

    // Cumulative image arc length on a fine grid, for arc positions and
    // the uniformity statistic. The speed is the radial limit of
    // exp(Re phi) on the boundary.
    const int fine = 8 * nq_;
    std::vector<double> speed(static_cast<std::size_t>(fine));
    for (int i = 0; i < fine; ++i) {
        const double theta = kTwoPi * i / fine;
        speed[static_cast<std::size_t>(i)] =
            std::exp(phi_unit(std::polar(1.0, theta)).real());
    }
    cum_.assign(static_cast<std::size_t>(fine) + 1, 0.0);
    Accum arc;
    for (int i = 0; i < fine; ++i) {
        const double next = speed[static_cast<std::size_t>((i + 1) % fine)];
        arc.add(0.5 * (speed[static_cast<std::size_t>(i)] + next) * (kTwoPi / fine));
        cum_[static_cast<std::size_t>(i) + 1] = arc.value();
    }
    total_arc_ = cum_.back();
}

std::complex<double> ConformalMap::phi_unit(std::complex<double> w) const {
    const double r = std::abs(w);
    if (r > 1.0 - eps_) w *= (1.0 - eps_) / r;
    cplx re_acc(0.0, 0.0);
    for (int j = 0; j < nq_; ++j) {
        const cplx xi = std::polar(1.0, kTwoPi * j / nq_);
        re_acc += u_[static_cast<std::size_t>(j)] * (xi + w) / (xi - w);
    }
    return re_acc / static_cast<double>(nq_);
}

std::complex<double> ConformalMap::map_unit(std::complex<double> w) const {
    if (w == cplx(0.0, 0.0)) return w;
    const double r = std::abs(w);
    const double inner = std::min(r, 1.0 - eps_);
    const cplx dir = w / r;
    // Smooth part along the ray, then the frozen sliver (where phi is
    // constant by the radial clamp) exactly.
    const auto integrand = [&](double t) { return std::exp(phi_unit(t * dir)) * dir; };
    cplx out = adaptive_simpson(integrand, 0.0, inner, 1e-9);
    if (r > inner) out += (r - inner) * dir * std::exp(phi_unit(w));
    return out;
}

std::complex<double> ConformalMap::phi(std::complex<double> z) const {
    return phi_unit(z / l_);
}

std::complex<double> ConformalMap::map(std::complex<double> z) const {
    return map_unit(z / l_);
}

std::complex<double> ConformalMap::boundary_point(double theta) const {
    return map_unit(std::polar(1.0, theta));
}

double ConformalMap::boundary_speed(double theta) const {
    return std::exp(phi_unit(std::polar(1.0, theta)).real());
}

double ConformalMap::arc_position(double theta) const {
    const int fine = static_cast<int>(cum_.size()) - 1;
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    const double step = kTwoPi / fine;
    int cell = static_cast<int>(t / step);
    if (cell >= fine) cell = fine - 1;
    const double t0 = cell * step;
    const double frac = (t - t0) / step;
    const double v0 = (cum_[static_cast<std::size_t>(cell) + 1] -
                       cum_[static_cast<std::size_t>(cell)]) /
                      step;
    // Within a cell the speed is treated as constant at its trapezoid
    // average, which keeps positions monotone in theta.
    double s = cum_[static_cast<std::size_t>(cell)] + v0 * frac * step;
    double pos = s / total_arc_;
    if (pos >= 1.0) pos -= 1.0;
    if (pos < 0.0) pos = 0.0;
    return pos;
}

double ConformalMap::mean_boundary_log() const {
    Accum acc;
    for (double u : u_) acc.add(u);
    return acc.value() / static_cast<double>(nq_);
}

BoundaryImage boundary_image(const ConformalMap& m, int n_points) {
    require(n_points >= 3, "conformal: a boundary polyline needs at least three points");
    BoundaryImage img;
    img.points.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const cplx p = m.boundary_point(kTwoPi * i / n_points);
        img.points.emplace_back(p.real(), p.imag());
    }
    Accum per;
    for (int i = 0; i < n_points; ++i) {
        const auto& a = img.points[static_cast<std::size_t>(i)];
        const auto& b = img.points[static_cast<std::size_t>((i + 1) % n_points)];
        per.add(std::hypot(b.first - a.first, b.second - a.second));
    }
    img.perimeter = per.value();
    return img;
}

double pushforward_uniformity(const ConformalMap& m, const std::vector<double>& angles) {
    std::vector<double> pos;
    pos.reserve(angles.size());
    for (double a : angles) pos.push_back(m.arc_position(a));
    return ks_statistic(std::move(pos));
}

}  // namespace msplit
