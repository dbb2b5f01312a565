#include "mfglab/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfglab/kernels.hpp"

namespace mfg {

namespace {

// velocity field b = -u_x on the lattice, centered in space
Field velocity_field(const Field& u) {
    Field b(u.grid, FieldKind::Velocity);
    const double dx = u.grid.dx();
    for (int n = 0; n <= u.grid.nt; ++n) {
        const auto ul = u.level(n);
        auto bl = b.level(n);
        const int nx = u.grid.nx;
        for (int i = 1; i + 1 < nx; ++i) bl[i] = -(ul[i + 1] - ul[i - 1]) / (2.0 * dx);
        bl[0] = -(ul[1] - ul[0]) / dx;
        bl[nx - 1] = -(ul[nx - 1] - ul[nx - 2]) / dx;
    }
    return b;
}

double trace_interp(std::span<const double> t, std::span<const double> y, double s) {
    if (s <= t.front()) return y.front();
    if (s >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    const double w = (s - t[k]) / (t[k + 1] - t[k]);
    return y[k] * (1.0 - w) + y[k + 1] * w;
}

// least-squares slope of a trace over t in [center-h, center+h]
double trace_slope(std::span<const double> t, std::span<const double> y,
                   double center, double h) {
    double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < center - h || t[k] > center + h) continue;
        sw += 1.0;
        st += t[k];
        sy += y[k];
        stt += t[k] * t[k];
        sty += t[k] * y[k];
    }
    const double det = sw * stt - st * st;
    if (sw < 2.0 || std::abs(det) < 1e-300) return 0.0;
    return (sw * sty - st * sy) / det;
}

} // namespace

FlowField integrate_flow(const Field& u, std::span<const double> source_points) {
    const Grid& grid = u.grid;
    const Field b = velocity_field(u);
    const double dt = grid.dt();

    FlowField flow;
    flow.source_points.assign(source_points.begin(), source_points.end());
    flow.t_samples.resize(grid.nt + 1);
    for (int n = 0; n <= grid.nt; ++n) flow.t_samples[n] = grid.time(n);
    const int ns = flow.ns();
    const int ntimes = grid.nt + 1;
    flow.gamma.assign(static_cast<std::size_t>(ns) * ntimes, 0.0);
    flow.gamma_x.assign(static_cast<std::size_t>(ns) * ntimes, 0.0);
    flow.exited.assign(ns, 0);

#pragma omp parallel for schedule(static)
    for (int s = 0; s < ns; ++s) {
        double x = source_points[s];
        for (int n = 0; n < ntimes; ++n) {
            flow.gamma[static_cast<std::size_t>(s) * ntimes + n] = x;
            if (n == grid.nt) break;
            const double tn = grid.time(n);
            const double xm = x + 0.5 * dt * b.interp(x, tn);
            x += dt * b.interp(xm, tn + 0.5 * dt);
            if (x < grid.x_min || x > grid.x_max) {
                flow.exited[s] = 1;
                x = std::clamp(x, grid.x_min, grid.x_max);
            }
        }
    }

    for (int n = 0; n < ntimes; ++n) {
        for (int s = 0; s < ns; ++s) {
            const int lo = std::max(s - 1, 0);
            const int hi = std::min(s + 1, ns - 1);
            const double dgx = flow.g(hi, n) - flow.g(lo, n);
            const double dsx = source_points[hi] - source_points[lo];
            flow.gamma_x[static_cast<std::size_t>(s) * ntimes + n] =
                dsx > 0.0 ? dgx / dsx : 1.0;
        }
    }
    return flow;
}

FreeBoundary extract_free_boundary(const Field& m, double theta, double threshold) {
    const Grid& grid = m.grid;
    const double dx = grid.dx();
    FreeBoundary fb;
    fb.t_samples.resize(grid.nt + 1);
    fb.left.resize(grid.nt + 1);
    fb.right.resize(grid.nt + 1);

    for (int n = 0; n <= grid.nt; ++n) {
        fb.t_samples[n] = grid.time(n);
        const auto row = m.level(n);
        int lo = 0, hi = grid.nx - 1;
        while (lo < grid.nx && kernels::power(row[lo], theta) <= threshold) ++lo;
        while (hi >= 0 && kernels::power(row[hi], theta) <= threshold) --hi;
        if (lo > hi)
            throw std::runtime_error("extract_free_boundary: empty support at time index " +
                                     std::to_string(n));

        double peak = 0.0;
        for (int i = lo; i <= hi; ++i)
            peak = std::max(peak, kernels::power(row[i], theta));
        // anchor the zero extrapolation in the resolved part of the linear
        // edge law; schemes leave sub-resolution tails beyond it
        const double anchor = std::max(threshold, 0.05 * peak);

        auto edge_left = [&]() {
            int a = lo;
            while (a + 1 <= hi && kernels::power(row[a], theta) < anchor) ++a;
            const double pa = kernels::power(row[a], theta);
            double x = grid.x_center(a) - 0.5 * dx;  // fallback: the cell face
            if (a + 1 <= hi) {
                const double pb = kernels::power(row[a + 1], theta);
                if (pb > pa) x = grid.x_center(a) - pa * dx / (pb - pa);
            }
            return std::clamp(x, grid.x_center(lo) - dx, grid.x_center(a));
        };
        auto edge_right = [&]() {
            int a = hi;
            while (a - 1 >= lo && kernels::power(row[a], theta) < anchor) --a;
            const double pa = kernels::power(row[a], theta);
            double x = grid.x_center(a) + 0.5 * dx;
            if (a - 1 >= lo) {
                const double pb = kernels::power(row[a - 1], theta);
                if (pb > pa) x = grid.x_center(a) + pa * dx / (pb - pa);
            }
            return std::clamp(x, grid.x_center(a), grid.x_center(hi) + dx);
        };
        fb.left[n] = edge_left();
        fb.right[n] = edge_right();
    }

    const int nt = grid.nt;
    fb.dleft.resize(nt + 1);
    fb.dright.resize(nt + 1);
    const double dt = grid.dt();
    for (int n = 0; n <= nt; ++n) {
        const int a = std::max(n - 1, 0);
        const int b = std::min(n + 1, nt);
        fb.dleft[n] = (fb.left[b] - fb.left[a]) / ((b - a) * dt);
        fb.dright[n] = (fb.right[b] - fb.right[a]) / ((b - a) * dt);
    }
    return fb;
}

std::vector<double> lagrangian_density(const Field& m, const FlowField& flow,
                                       double theta) {
    const int ns = flow.ns();
    const int ntimes = flow.ntimes();
    std::vector<double> p(static_cast<std::size_t>(ns) * ntimes);
    for (int s = 0; s < ns; ++s)
        for (int n = 0; n < ntimes; ++n)
            p[static_cast<std::size_t>(s) * ntimes + n] =
                kernels::power(m.interp(flow.g(s, n), flow.t_samples[n]), theta);
    return p;
}

HarnackReport harnack_ratio(const Field& m, const FlowField& flow, double theta,
                            double alpha) {
    const std::vector<double> p = lagrangian_density(m, flow, theta);
    const int ns = flow.ns();
    const int ntimes = flow.ntimes();
    const double a0 = flow.source_points.front();
    const double b0 = flow.source_points.back();

    HarnackReport rep;
    // centers at interior quartiles of the sources, geometric times
    const double t_first = flow.t_samples.front();
    const double t_last = flow.t_samples.back();
    for (double frac : {0.25, 0.5, 0.75}) {
        for (double t0 = std::max(t_first + 0.25 * (t_last - t_first), 0.05);
             t0 <= 0.95 * t_last; t0 *= 1.7) {
            const double x0 = a0 + frac * (b0 - a0);
            // nearest sample indices
            int sc = 0;
            for (int s = 0; s < ns; ++s)
                if (std::abs(flow.source_points[s] - x0) <
                    std::abs(flow.source_points[sc] - x0))
                    sc = s;
            int nc = 0;
            for (int n = 0; n < ntimes; ++n)
                if (std::abs(flow.t_samples[n] - t0) < std::abs(flow.t_samples[nc] - t0))
                    nc = n;
            const double p0 = p[static_cast<std::size_t>(sc) * ntimes + nc];
            if (p0 <= 0.0) continue;

            const double dist = std::min(x0 - a0, b0 - x0);
            const double ta = std::pow(t0, alpha);
            // radius keeping the rectangle inside the admissible region
            const double rho = std::min(0.4 * dist * std::sqrt(ta),
                                        0.4 * t0 * std::sqrt(theta * p0 / ta));
            const double half_x = rho / std::sqrt(ta);
            const double half_t = rho * std::sqrt(ta / (theta * p0));

            double sup = 0.0, inf = std::numeric_limits<double>::infinity();
            for (int s = 0; s < ns; ++s) {
                if (std::abs(flow.source_points[s] - x0) > half_x) continue;
                for (int n = 0; n < ntimes; ++n) {
                    if (flow.t_samples[n] > t0 || flow.t_samples[n] < t0 - half_t) continue;
                    const double v = p[static_cast<std::size_t>(s) * ntimes + n];
                    sup = std::max(sup, v);
                    inf = std::min(inf, v);
                }
            }
            if (inf > 0.0 && sup > 0.0 && std::isfinite(inf)) {
                rep.worst_ratio = std::max(rep.worst_ratio, sup / inf);
                ++rep.rectangles;
            }
        }
    }
    return rep;
}

std::vector<ProbeReport> check_vanishing_trajectories(
    const Field& u, const FreeBoundary& fb,
    std::span<const std::pair<double, double>> probes) {
    const Grid& grid = u.grid;
    const Field b = velocity_field(u);
    const double dx = grid.dx();
    const double dt = grid.dt();
    const double t_end = grid.t1;
    const double tol = 2.0 * dx;  // contact with an interpolated curve is mesh limited
    const double follow_tol = 6.0 * dx;
    const double slope_window = std::max(10.0 * dt, 0.03 * (grid.t1 - grid.t0));

    std::vector<ProbeReport> out;
    out.reserve(probes.size());
    for (const auto& [px, pt] : probes) {
        const double gl = trace_interp(fb.t_samples, fb.left, pt);
        const double gr = trace_interp(fb.t_samples, fb.right, pt);
        if (px > gl && px < gr)
            throw std::domain_error("check_vanishing_trajectories: probe inside the support");
        const bool left_side = px <= gl;

        ProbeReport rep;
        rep.x = px;
        rep.t = pt;
        const auto& trace = left_side ? fb.left : fb.right;
        const double g_end = trace.back();

        // integrate the characteristic from the probe to the terminal time
        std::vector<double> beta_t, beta_x;
        double x = px;
        for (double s = pt; s < t_end - 0.5 * dt; s += dt) {
            beta_t.push_back(s);
            beta_x.push_back(x);
            const double step = std::min(dt, t_end - s);
            const double xm = x + 0.5 * step * b.interp(x, s);
            x += step * b.interp(xm, s + 0.5 * step);
        }
        beta_t.push_back(t_end);
        beta_x.push_back(x);

        // first contact with the boundary
        rep.tangency_time = std::numeric_limits<double>::quiet_NaN();
        std::size_t contact = beta_t.size();
        for (std::size_t k = 0; k < beta_t.size(); ++k) {
            const double gb = trace_interp(fb.t_samples, trace, beta_t[k]);
            if (std::abs(beta_x[k] - gb) <= tol) {
                contact = k;
                rep.tangency_time = beta_t[k];
                break;
            }
        }
        bool follows = contact < beta_t.size();
        for (std::size_t k = contact; k < beta_t.size(); ++k) {
            const double gb = trace_interp(fb.t_samples, trace, beta_t[k]);
            if (std::abs(beta_x[k] - gb) > follow_tol) follows = false;
        }

        auto chord_residual = [&](std::size_t k_end) {
            if (k_end == 0) return 0.0;
            const double x0 = beta_x[0], t0 = beta_t[0];
            const double slope = (beta_x[k_end] - x0) / (beta_t[k_end] - t0);
            double worst = 0.0;
            for (std::size_t k = 0; k <= k_end; ++k)
                worst = std::max(worst,
                                 std::abs(beta_x[k] - (x0 + slope * (beta_t[k] - t0))));
            return worst;
        };
        double still = 0.0;
        for (double bx : beta_x) still = std::max(still, std::abs(bx - px));
        const double whole_res = chord_residual(beta_x.size() - 1);
        const bool interior_contact =
            contact < beta_t.size() &&
            rep.tangency_time < t_end - 0.05 * (t_end - pt);

        // the integrated path itself decides the case: a standing path, a
        // single straight chord into the terminal corner of the boundary, or
        // a straight lead-in that bends onto the boundary
        if (still <= tol) {
            rep.classified = TrajectoryCase::Constant;
            rep.linear_residual = still;
            rep.confirmed = true;
        } else if (interior_contact && follows && whole_res > tol) {
            rep.classified = TrajectoryCase::TangentThenBoundary;
            rep.linear_residual = chord_residual(contact);
            rep.confirmed = rep.linear_residual <= tol && rep.tangency_time > pt;
        } else {
            rep.classified = TrajectoryCase::Chord;
            rep.linear_residual = whole_res;
            // the extracted corner carries the scheme's terminal tail, so the
            // endpoint check gets the wider tolerance
            rep.confirmed = whole_res <= tol &&
                            std::abs(beta_x.back() - g_end) <= 2.0 * follow_tol;
        }

        rep.u_x_probe = (u.interp(px + 0.5 * dx, pt) - u.interp(px - 0.5 * dx, pt)) / dx;
        const double vl = std::abs(trace_slope(fb.t_samples, fb.left, pt, slope_window));
        const double vr = std::abs(trace_slope(fb.t_samples, fb.right, pt, slope_window));
        rep.speed_bound = std::max(vl, vr);
        rep.gradient_bound_ok =
            std::abs(rep.u_x_probe) <= rep.speed_bound + 0.03 * rep.speed_bound + 2.0 * dx;
        out.push_back(rep);
    }
    return out;
}

} // namespace mfg
