#include "mfglab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfglab/kernels.hpp"
#include "mfglab/linfit.hpp"

namespace mfg {

namespace {

constexpr double kGeometricRatio = 1.189207115002721;  // 2^(1/4)

int nearest_level(const Grid& grid, double t) {
    const int n = static_cast<int>(std::lround((t - grid.t0) / grid.dt()));
    return std::clamp(n, 0, grid.nt);
}

void require_decade(double t_lo, double t_hi, const char* who) {
    if (!(t_lo > 0.0) || t_hi < 10.0 * t_lo)
        throw std::domain_error(std::string(who) +
                                ": fit window must span at least one decade");
}

RateFit loglog_fit(const std::string& quantity, std::span<const double> t,
                   std::span<const double> y, double target, double t_lo, double t_hi) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(y[k] > 0.0))
            throw std::domain_error("rate fit (" + quantity +
                                    "): nonpositive sample, log fit invalid");
        xs.push_back(std::log(t[k]));
        ys.push_back(std::log(y[k]));
    }
    const LineFit f = fit_line(xs, ys);
    return RateFit{quantity, f.slope, target, f.r_squared, t_lo, t_hi};
}

// least-squares quadratic through the trace samples nearest to t (5 of them);
// returns value/slope/curvature at t
struct LocalQuadratic {
    double value, slope, curvature;
};
LocalQuadratic quadratic_at(std::span<const double> t, std::span<const double> y,
                            double center) {
    // indices of the 5 samples closest to center
    std::size_t k0 = 0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (std::abs(t[k] - center) < std::abs(t[k0] - center)) k0 = k;
    const std::size_t lo = k0 >= 2 ? k0 - 2 : 0;
    const std::size_t hi = std::min(lo + 4, t.size() - 1);
    const std::size_t start = hi >= 4 ? hi - 4 : 0;

    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, b0 = 0, b1 = 0, b2 = 0;
    for (std::size_t k = start; k <= hi; ++k) {
        const double d = t[k] - center;
        const double d2 = d * d;
        s0 += 1;
        s1 += d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
        b0 += y[k];
        b1 += y[k] * d;
        b2 += y[k] * d2;
    }
    // solve the 3x3 normal equations by Cramer
    const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) +
                       s2 * (s1 * s3 - s2 * s2);
    if (std::abs(det) < 1e-300) return {b0 / std::max(s0, 1.0), 0.0, 0.0};
    const double c0 = (b0 * (s2 * s4 - s3 * s3) - s1 * (b1 * s4 - b2 * s3) +
                       s2 * (b1 * s3 - b2 * s2)) /
                      det;
    const double c1 = (s0 * (b1 * s4 - b2 * s3) - b0 * (s1 * s4 - s2 * s3) +
                       s2 * (s1 * b2 - s2 * b1)) /
                      det;
    const double c2 = (s0 * (s2 * b2 - s3 * b1) - s1 * (s1 * b2 - s2 * b1) +
                       b0 * (s1 * s3 - s2 * s2)) /
                      det;
    return {c0, c1, 2.0 * c2};
}

} // namespace

std::vector<double> geometric_times(const Grid& grid, double t_lo, double t_hi) {
    std::vector<double> out;
    int prev = -1;
    for (double t = t_lo; t <= t_hi * (1.0 + 1e-12); t *= kGeometricRatio) {
        const int n = nearest_level(grid, t);
        if (n != prev) out.push_back(grid.time(n));
        prev = n;
    }
    if (out.size() < 3) throw std::domain_error("geometric_times: window too coarse");
    return out;
}

SmoothingReport smoothing_check(const Field& m, const Params& params, double t_lo,
                                double t_hi) {
    require_decade(t_lo, t_hi, "smoothing_check");
    const std::vector<double> ts = geometric_times(m.grid, t_lo, t_hi);
    std::vector<double> norms(ts.size());
    SmoothingReport rep;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        norms[k] = max_abs(m.level(nearest_level(m.grid, ts[k])));
        rep.sup_scaled_norm = std::max(
            rep.sup_scaled_norm, (1.0 + std::pow(ts[k], params.alpha)) * norms[k]);
    }
    rep.fit = loglog_fit("density_sup_norm", ts, norms, -params.alpha, t_lo, t_hi);
    return rep;
}

FreeBoundaryRates free_boundary_rates(const FreeBoundary& fb, const Params& params,
                                      double t_lo, double t_hi) {
    const double t_end = fb.t_samples.back();
    if (params.variant == Variant::Planning) t_hi = std::min(t_hi, 0.5 * t_end);
    if (!(t_lo > 0.0) || !(t_hi > t_lo))
        throw std::domain_error("free_boundary_rates: bad window");

    std::vector<double> ts;
    for (double t = t_lo; t <= t_hi * (1.0 + 1e-12); t *= kGeometricRatio)
        ts.push_back(t);
    if (ts.size() < 7) throw std::domain_error("free_boundary_rates: window too coarse");

    FreeBoundaryRates rep;
    rep.left_convex = true;
    rep.right_concave = true;
    rep.min_left_curvature = std::numeric_limits<double>::infinity();
    rep.max_right_curvature = -std::numeric_limits<double>::infinity();

    // geometric resampling first (local quadratic smoothing of the raw
    // trace): derivative estimates on the per-step trace would amplify
    // localization noise
    std::vector<double> gr(ts.size()), gl(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        gr[k] = quadratic_at(fb.t_samples, fb.right, ts[k]).value;
        gl[k] = quadratic_at(fb.t_samples, fb.left, ts[k]).value;
    }
    auto d1 = [&](const std::vector<double>& y, std::size_t k) {
        return (y[k + 1] - y[k - 1]) / (ts[k + 1] - ts[k - 1]);
    };
    auto d2 = [&](const std::vector<double>& y, std::size_t k) {
        const double right = (y[k + 1] - y[k]) / (ts[k + 1] - ts[k]);
        const double left = (y[k] - y[k - 1]) / (ts[k] - ts[k - 1]);
        return 2.0 * (right - left) / (ts[k + 1] - ts[k - 1]);
    };
    std::vector<double> tmid, pos, speed, curv;
    for (std::size_t k = 1; k + 1 < ts.size(); ++k) {
        tmid.push_back(ts[k]);
        pos.push_back(gr[k]);
        speed.push_back(std::abs(d1(gr, k)));
        const double cl = d2(gl, k);
        const double cr = d2(gr, k);
        curv.push_back(std::abs(cr));
        rep.min_left_curvature = std::min(rep.min_left_curvature, cl);
        rep.max_right_curvature = std::max(rep.max_right_curvature, cr);
        if (!(cl > 0.0)) rep.left_convex = false;
        if (!(cr < 0.0)) rep.right_concave = false;
    }
    rep.position = loglog_fit("boundary_position", tmid, pos, params.alpha, t_lo, t_hi);
    rep.speed = loglog_fit("boundary_speed", tmid, speed, params.alpha - 1.0, t_lo, t_hi);
    rep.curvature =
        loglog_fit("boundary_curvature", tmid, curv, params.alpha - 2.0, t_lo, t_hi);
    return rep;
}

GradientRates gradient_rate_check(const Field& u, const Params& params, double t_lo,
                                  double t_hi) {
    require_decade(t_lo, t_hi, "gradient_rate_check");
    const Grid& grid = u.grid;
    const std::vector<double> ts = geometric_times(grid, t_lo, t_hi);
    std::vector<double> gx(ts.size()), gt(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const int n = nearest_level(grid, ts[k]);
        gx[k] = max_abs(space_derivative(u.level(n), grid.dx()));
        const int a = std::max(n - 1, 0);
        const int b = std::min(n + 1, grid.nt);
        double worst = 0.0;
        for (int i = 0; i < grid.nx; ++i)
            worst = std::max(worst,
                             std::abs(u.at(b, i) - u.at(a, i)) / ((b - a) * grid.dt()));
        gt[k] = worst;
    }
    GradientRates rep;
    rep.space = loglog_fit("gradient_sup_norm", ts, gx, params.alpha - 1.0, t_lo, t_hi);
    rep.time = loglog_fit("time_derivative_sup_norm", ts, gt,
                          2.0 * (params.alpha - 1.0), t_lo, t_hi);
    return rep;
}

ConvexityReport displacement_convexity_check(const Field& m, double p) {
    if (p == 0.0 || p == 1.0 || p < 0.0)
        throw std::domain_error("displacement_convexity_check: p must lie in (0,1) or (1,inf)");
    const Grid& grid = m.grid;
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double pref = 1.0 / (p * (p - 1.0));

    ConvexityReport rep;
    rep.t.resize(grid.nt + 1);
    rep.phi.resize(grid.nt + 1);
    double phi_max = 0.0;
    for (int n = 0; n <= grid.nt; ++n) {
        rep.t[n] = grid.time(n);
        double s = 0.0;
        for (double v : m.level(n)) s += std::pow(v, p);
        rep.phi[n] = pref * s * dx;
        phi_max = std::max(phi_max, std::abs(rep.phi[n]));
    }
    rep.min_curvature = std::numeric_limits<double>::infinity();
    for (int n = 1; n < grid.nt; ++n) {
        const double c = (rep.phi[n - 1] - 2.0 * rep.phi[n] + rep.phi[n + 1]) / (dt * dt);
        rep.min_curvature = std::min(rep.min_curvature, c);
    }
    rep.tolerance = (dx + dt) * std::max(1.0, phi_max);
    rep.convex = rep.min_curvature >= -rep.tolerance;
    return rep;
}

RateFit energy_rate_check(const Field& m, const Params& params, double eps,
                          double t_lo, double t_hi) {
    if (!(eps > 0.0 && eps < 1.0))
        throw std::domain_error("energy_rate_check: eps must lie in (0,1)");
    const Grid& grid = m.grid;
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double q = 0.5 * (params.theta + eps);

    std::vector<double> ts, vals;
    for (double t0 = t_lo; t0 <= t_hi * (1.0 + 1e-12); t0 *= kGeometricRatio) {
        if (2.0 * t0 > grid.t1) break;
        const int n_lo = nearest_level(grid, 0.5 * t0);
        const int n_hi = nearest_level(grid, 2.0 * t0);
        double acc = 0.0;
        for (int n = n_lo; n <= n_hi; ++n) {
            const auto row = m.level(n);
            double level_sum = 0.0;
            for (int i = 1; i + 1 < grid.nx; ++i) {
                const double g =
                    (std::pow(row[i + 1], q) - std::pow(row[i - 1], q)) / (2.0 * dx);
                level_sum += g * g;
            }
            acc += level_sum * dx * dt;
        }
        ts.push_back(t0);
        vals.push_back(acc);
    }
    if (ts.size() < 4) throw std::domain_error("energy_rate_check: window too coarse");
    return loglog_fit("dissipation_integral", ts, vals,
                      -(1.0 - params.alpha * (1.0 - eps)), t_lo, t_hi);
}

DriftReport hamiltonian_conservation(const Field& u, const Field& m, double theta) {
    const Grid& grid = m.grid;
    const double dx = grid.dx();
    DriftReport rep;
    rep.t.resize(grid.nt + 1);
    rep.H.resize(grid.nt + 1);
    for (int n = 0; n <= grid.nt; ++n) {
        rep.t[n] = grid.time(n);
        const auto mrow = m.level(n);
        const std::vector<double> ux = space_derivative(u.level(n), dx);
        double s = 0.0;
        for (int i = 0; i < grid.nx; ++i)
            s += 0.5 * mrow[i] * ux[i] * ux[i] -
                 kernels::power(mrow[i], theta) * mrow[i] / (theta + 1.0);
        rep.H[n] = s * dx;
    }
    const double h0 = rep.H.front();
    for (double h : rep.H)
        rep.max_relative_drift =
            std::max(rep.max_relative_drift, std::abs(h - h0) / (std::abs(h0) + 1.0));
    return rep;
}

} // namespace mfg
