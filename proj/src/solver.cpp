#include "mfglab/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mfglab/quadrature.hpp"
#include "mfglab/variational.hpp"

namespace mfg {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void check_cfl(double dt, double vmax, double dx, double cfl) {
    if (dt * vmax > cfl * dx) throw CflError(dt, vmax > 0.0 ? cfl * dx / vmax : dt);
}

// sup over time levels of the spatial L1 distance
double field_l1_distance(const Field& a, const Field& b) {
    double worst = 0.0;
    for (int n = 0; n <= a.grid.nt; ++n)
        worst = std::max(worst, l1_distance(a.level(n), b.level(n), a.grid.dx()));
    return worst;
}

struct DataShape {
    double center = 0.0;
    double half_width = 1.0;
    double t_matched = 1.0;  // profile time whose support width matches the data
};

DataShape shape_of(std::span<const double> m0, const SelfSimilarProfile& prof,
                   const Grid& grid) {
    DataShape s;
    int lo = 0, hi = grid.nx - 1;
    while (lo < grid.nx && m0[lo] <= 0.0) ++lo;
    while (hi >= 0 && m0[hi] <= 0.0) --hi;
    if (lo <= hi) {
        s.center = 0.5 * (grid.x_center(lo) + grid.x_center(hi));
        s.half_width = std::max(0.5 * (grid.x_center(hi) - grid.x_center(lo)),
                                2.0 * grid.dx());
    }
    s.t_matched = std::pow(s.half_width / prof.support_half_width, 1.0 / prof.alpha);
    return s;
}

// Coupling guess: the spreading profile of the same mass, time-shifted so its
// support width matches the data.
Field warm_start_density(std::span<const double> m0, const Params& params,
                         const Grid& grid) {
    const SelfSimilarProfile prof =
        SelfSimilarProfile::make(discrete_mass(m0, grid.dx()), params.theta);
    const DataShape s = shape_of(m0, prof, grid);
    Field mbar(grid, FieldKind::Density);
    for (int n = 0; n <= grid.nt; ++n) {
        const double t = s.t_matched + (grid.time(n) - grid.t0);
        auto row = mbar.level(n);
        for (int i = 0; i < grid.nx; ++i)
            row[i] = prof.eval(grid.x_center(i) - s.center, t).m;
    }
    return mbar;
}

// Potential guess for the dual ascent, matched the same way.
std::vector<double> warm_start_value(std::span<const double> m0, const Params& params,
                                     const Grid& grid) {
    const SelfSimilarProfile prof =
        SelfSimilarProfile::make(discrete_mass(m0, grid.dx()), params.theta);
    const DataShape s = shape_of(m0, prof, grid);
    const double t_end = s.t_matched + (grid.t1 - grid.t0);
    const SelfSimilarProfile tc = prof.with_terminal_constant(t_end);
    Field u = sample_self_similar_value(tc, grid, s.t_matched - grid.t0);
    if (s.center != 0.0) {
        Field shifted(grid, FieldKind::Value);
        for (int n = 0; n <= grid.nt; ++n)
            for (int i = 0; i < grid.nx; ++i)
                shifted.at(n, i) = u.interp(grid.x_center(i) - s.center, grid.time(n));
        return std::move(shifted.data);
    }
    return std::move(u.data);
}

// Planning warm start: the displacement interpolation between the marginals.
// The monotone rearrangement T with F0 = FT o T gives straight-line particle
// paths with velocity v = (T(x)-x)/(t1-t0); since trajectories obey
// gamma' = -u_x, the potential guess integrates -v in space and is held
// constant in time. Equal marginals give the zero potential.
std::vector<double> planning_warm_start(std::span<const double> m0,
                                        std::span<const double> mT, const Grid& grid) {
    const int nx = grid.nx;
    const double dx = grid.dx();
    std::vector<double> c0(nx + 1, 0.0), cT(nx + 1, 0.0);
    for (int i = 0; i < nx; ++i) {
        c0[i + 1] = c0[i] + m0[i] * dx;
        cT[i + 1] = cT[i] + mT[i] * dx;
    }
    const double total = c0[nx];
    // position where the target cumulative reaches w
    auto target_pos = [&](double wgt) {
        const auto it = std::lower_bound(cT.begin(), cT.end(), wgt);
        int k = static_cast<int>(it - cT.begin());
        k = std::clamp(k, 1, nx);
        const double seg = cT[k] - cT[k - 1];
        const double frac = seg > 0.0 ? (wgt - cT[k - 1]) / seg : 0.0;
        return grid.x_min + (k - 1 + frac) * dx;
    };
    std::vector<double> v(nx, 0.0);
    const double horizon = grid.t1 - grid.t0;
    for (int i = 0; i < nx; ++i) {
        const double wgt = 0.5 * (c0[i] + c0[i + 1]);
        if (wgt <= 0.0 || wgt >= total) continue;  // no mass here, no motion
        v[i] = (target_pos(wgt) - grid.x_center(i)) / horizon;
    }
    std::vector<double> phi(nx, 0.0);
    for (int i = 1; i < nx; ++i) phi[i] = phi[i - 1] - 0.5 * (v[i - 1] + v[i]) * dx;

    std::vector<double> U(static_cast<std::size_t>(grid.nt + 1) * nx);
    for (int n = 0; n <= grid.nt; ++n)
        std::copy(phi.begin(), phi.end(),
                  U.begin() + static_cast<std::size_t>(n) * nx);
    return U;
}

void validate_density_trace(std::span<const double> m0, const Grid& grid,
                            const char* who) {
    for (double v : m0)
        if (v < 0.0) throw std::domain_error(std::string(who) + ": negative input density");
    if (m0[0] != 0.0 || m0[grid.nx - 1] != 0.0)
        throw std::domain_error(std::string(who) +
                                ": initial support must be strictly inside the domain");
}

// ------------------------------------------------------------------- dual ---

// Interpolate the optimizer's face densities onto the lattice levels.
Field coupling_on_lattice(const DualProblem& prob, std::span<const double> U,
                          const Grid& grid) {
    const Grid& gd = prob.grid;
    const int nfaces = gd.nt;
    std::vector<std::vector<double>> faces(nfaces, std::vector<double>(gd.nx));
#pragma omp parallel for schedule(static)
    for (int f = 0; f < nfaces; ++f) dual_face_density(prob, U, f, faces[f]);

    Field mbar(grid, FieldKind::Density);
    for (int n = 0; n <= grid.nt; ++n) {
        double s = (grid.time(n) - gd.t0) / gd.dt() - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(nfaces - 1));
        const int f0 = std::min(static_cast<int>(s), nfaces - 2 >= 0 ? nfaces - 2 : 0);
        const int f1 = std::min(f0 + 1, nfaces - 1);
        const double wgt = std::clamp(s - f0, 0.0, 1.0);
        auto row = mbar.level(n);
        for (int i = 0; i < grid.nx; ++i)
            row[i] = (1.0 - wgt) * faces[f0][i] + wgt * faces[f1][i];
    }
    return mbar;
}

Field potential_on_lattice(const Grid& gd, std::span<const double> U, const Grid& grid) {
    Field src(gd, FieldKind::Value);
    std::copy(U.begin(), U.end(), src.data.begin());
    if (grid == gd) return src;
    Field out(grid, FieldKind::Value);
#pragma omp parallel for schedule(static)
    for (int n = 0; n <= grid.nt; ++n)
        for (int i = 0; i < grid.nx; ++i)
            out.at(n, i) = src.interp(grid.x_center(i), grid.time(n));
    return out;
}

// Consistent pair on a CFL-compliant lattice: conservative transport along
// the dual potential, backward value sweep at the converged coupling. The
// lattice step halves on a CFL violation.
SolveResult build_pair(const DualProblem& prob, const DualResult& dual,
                       std::span<const double> m0, const Params& params,
                       const Grid& grid, const SolveOptions& opt) {
    Grid run = grid;
    for (int attempt = 0;; ++attempt) {
        try {
            const Field u_drive = potential_on_lattice(prob.grid, dual.U, run);
            Field m = transport_forward(m0, u_drive, opt.cfl, opt.density_floor, opt.exec);
            const Field mbar = coupling_on_lattice(prob, dual.U, run);
            std::vector<double> terminal(run.nx);
            if (prob.c_T > 0.0) {
                const auto last = mbar.level(run.nt);
                for (int i = 0; i < run.nx; ++i)
                    terminal[i] = prob.c_T * kernels::power(last[i], params.theta);
            } else {
                const std::size_t off =
                    static_cast<std::size_t>(prob.grid.nt) * prob.grid.nx;
                for (int i = 0; i < run.nx; ++i) terminal[i] = dual.U[off + i];
            }
            Field u = hj_backward(mbar, terminal, params, opt.cfl, opt.exec);
            return SolveResult{std::move(u), std::move(m), SolveReport{}};
        } catch (const CflError&) {
            if (attempt >= 3) throw;
            run = Grid::make(run.x_min, run.x_max, run.nx, run.t0, run.t1, 2 * run.nt);
        }
    }
}

SolveResult solve_dual(std::span<const double> m0, std::span<const double> mT,
                       const Params& params, const Grid& grid, const SolveOptions& opt) {
    const auto start = clock_type::now();
    const double dx = grid.dx();
    const double vscale = velocity_scale(m0, params, grid);

    // optimizer lattice: same cells, accuracy-driven step (no CFL constraint)
    const int nt_dual = std::max(
        48, static_cast<int>(std::ceil((grid.t1 - grid.t0) * vscale /
                                       (opt.dual_dt_factor * dx))));
    DualProblem prob;
    prob.grid = Grid::make(grid.x_min, grid.x_max, grid.nx, grid.t0, grid.t1, nt_dual);
    prob.theta = params.theta;
    prob.m0.assign(m0.begin(), m0.end());
    if (mT.empty()) {
        prob.c_T = params.kappa_T * grid.t1;
    } else {
        prob.mT.assign(mT.begin(), mT.end());
    }

    std::vector<double> U0 = mT.empty() ? warm_start_value(m0, params, prob.grid)
                                        : planning_warm_start(m0, mT, prob.grid);
    DualResult dual = maximize_dual(prob, std::move(U0), opt.max_iter, opt.tol, opt.exec);

    if (mT.empty()) {
        SolveResult result = build_pair(prob, dual, m0, params, grid, opt);
        result.report.iterations = dual.iterations;
        result.report.residual_history = std::move(dual.residual_history);
        result.report.converged = dual.converged;
        result.report.wall_time_seconds = seconds_since(start);
        return result;
    }

    // Planning: the transported terminal level misses the true target by the
    // discretization bias of the transport, so run a defect correction on the
    // terminal marginal: re-solve the dual against a pre-compensated target
    // until the realized terminal gap (what `tol` measures here) closes.
    const int inner_iter = std::max(60, opt.max_iter / 4);
    const double inner_tol = std::min(1e-6, 0.2 * opt.tol);
    const double mass0 = discrete_mass(m0, dx);
    std::vector<double> target(mT.begin(), mT.end());
    double relax = 1.0;
    double prev_gap = std::numeric_limits<double>::infinity();

    SolveResult result = build_pair(prob, dual, m0, params, grid, opt);
    SolveResult best = result;
    std::vector<double> target_best = target;
    double best_gap = std::numeric_limits<double>::infinity();

    SolveReport report;
    for (int outer = 0; outer < opt.planning_max_outer; ++outer) {
        const double gap = l1_distance(result.m.level(result.m.grid.nt), mT, dx);
        report.residual_history.push_back(gap);
        report.iterations = outer + 1;
        if (gap < best_gap) {
            best_gap = gap;
            best = result;
            target_best = target;
        }
        if (gap <= opt.tol) {
            report.converged = true;
            break;
        }
        // no measurable progress (the remaining gap is the front smear of the
        // transport, which target shifts cannot remove): stop ascending
        if (outer >= 8) {
            const double ref =
                report.residual_history[report.residual_history.size() - 9];
            if (best_gap > 0.98 * ref) break;
        }
        if (gap > prev_gap) {  // overshoot: damp and restart from the best target
            relax *= 0.5;
            target = target_best;
            result = best;
        } else {
            relax = std::min(relax * 1.2, 1.0);
        }
        prev_gap = gap;
        const auto last = result.m.level(result.m.grid.nt);
        double mass_t = 0.0;
        for (int i = 0; i < grid.nx; ++i) {
            target[i] = std::max(0.0, target[i] - relax * (last[i] - mT[i]));
            mass_t += target[i];
        }
        mass_t *= dx;
        if (mass_t > 0.0)
            for (double& v : target) v *= mass0 / mass_t;
        prob.mT = target;
        dual = maximize_dual(prob, std::move(dual.U), inner_iter, inner_tol, opt.exec);
        result = build_pair(prob, dual, m0, params, grid, opt);
    }
    if (!report.converged && best_gap < l1_distance(result.m.level(result.m.grid.nt), mT, dx))
        result = std::move(best);
    result.report = std::move(report);
    result.report.wall_time_seconds = seconds_since(start);
    return result;
}

// ------------------------------------------------- legacy splitting modes ---

struct FictitiousPlayState {
    Field mbar;
    Field u;
    Field m_new;
};

void best_response(FictitiousPlayState& st, std::span<const double> m0,
                   std::span<const double> terminal_u, const Params& params,
                   const SolveOptions& opt) {
    st.u = hj_backward(st.mbar, terminal_u, params, opt.cfl, opt.exec);
    st.m_new = transport_forward(m0, st.u, opt.cfl, opt.density_floor, opt.exec);
}

template <typename TerminalFn>
SolveReport fictitious_play(FictitiousPlayState& st, std::span<const double> m0,
                            const Params& params, const SolveOptions& opt,
                            TerminalFn&& make_terminal, double tol, int max_iter) {
    SolveReport report;
    const Grid& grid = st.mbar.grid;
    std::vector<double> terminal(grid.nx);
    const bool picard = opt.algorithm == SolveAlgorithm::Picard;
    for (int k = 0; k < max_iter; ++k) {
        make_terminal(st.mbar, terminal);
        best_response(st, m0, terminal, params, opt);
        const double lambda = picard ? 1.0 : 2.0 / (k + 2.0);
        const double gap = field_l1_distance(st.m_new, st.mbar);
        double* avg = st.mbar.data.data();
        const double* fresh = st.m_new.data.data();
#pragma omp parallel for schedule(static)
        for (long long idx = 0; idx < static_cast<long long>(st.mbar.data.size()); ++idx)
            avg[idx] = (1.0 - lambda) * avg[idx] + lambda * fresh[idx];
        report.residual_history.push_back(lambda * gap);
        report.iterations = k + 1;
        if (lambda * gap <= tol) {
            report.converged = true;
            break;
        }
    }
    return report;
}

SolveResult solve_terminal_cost_splitting(std::span<const double> m0,
                                          const Params& params, const Grid& grid,
                                          const SolveOptions& opt) {
    const auto start = clock_type::now();
    const double c_T = params.kappa_T * grid.t1;
    FictitiousPlayState st{warm_start_density(m0, params, grid),
                           Field(grid, FieldKind::Value), Field(grid, FieldKind::Density)};
    auto terminal_from = [&](const Field& mbar, std::vector<double>& terminal) {
        const auto last = mbar.level(grid.nt);
        for (int i = 0; i < grid.nx; ++i)
            terminal[i] = c_T * kernels::power(last[i], params.theta);
    };
    SolveReport report =
        fictitious_play(st, m0, params, opt, terminal_from, opt.tol, opt.max_iter);
    std::vector<double> terminal(grid.nx);
    terminal_from(st.mbar, terminal);
    best_response(st, m0, terminal, params, opt);
    report.wall_time_seconds = seconds_since(start);
    return SolveResult{std::move(st.u), std::move(st.m_new), std::move(report)};
}

SolveResult solve_planning_splitting(std::span<const double> m0,
                                     std::span<const double> mT, const Params& params,
                                     const Grid& grid, const SolveOptions& opt) {
    const auto start = clock_type::now();
    const double dx = grid.dx();
    const double c_guess = grid.t1 / (1.0 - params.alpha);
    std::vector<double> psi(grid.nx);
    for (int i = 0; i < grid.nx; ++i)
        psi[i] = c_guess * kernels::power(mT[i], params.theta);

    FictitiousPlayState st{warm_start_density(m0, params, grid),
                           Field(grid, FieldKind::Value), Field(grid, FieldKind::Density)};
    auto fixed_terminal = [&](const Field&, std::vector<double>& terminal) {
        std::copy(psi.begin(), psi.end(), terminal.begin());
    };

    SolveReport report;
    double sigma = opt.planning_step_factor * dx;
    const double inner_tol = opt.tol * opt.planning_inner_tol_factor;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < opt.planning_max_outer; ++outer) {
        fictitious_play(st, m0, params, opt, fixed_terminal, inner_tol, opt.max_iter);
        std::vector<double> terminal(psi);
        best_response(st, m0, terminal, params, opt);
        const double gap = l1_distance(st.m_new.level(grid.nt), mT, dx);
        report.residual_history.push_back(gap);
        report.iterations = outer + 1;
        if (gap <= opt.tol) {
            report.converged = true;
            break;
        }
        if (gap > prev_gap) sigma *= 0.5;  // ascent overshot; damp the step
        prev_gap = gap;
        const auto last = st.m_new.level(grid.nt);
        for (int i = 0; i < grid.nx; ++i) psi[i] += sigma * (last[i] - mT[i]);
    }
    report.wall_time_seconds = seconds_since(start);
    return SolveResult{std::move(st.u), std::move(st.m_new), std::move(report)};
}

void normalize_planning_value(Field& u, const Field& m) {
    const Grid& grid = u.grid;
    const int nmid = grid.nt / 2;
    const auto u_mid = u.level(nmid);
    const auto m_mid = m.level(nmid);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < grid.nx; ++i) {
        num += u_mid[i] * m_mid[i];
        den += m_mid[i];
    }
    if (den > 0.0) {
        const double shift = num / den;
        for (double& v : u.data) v -= shift;
    }
}

} // namespace

Field hj_backward(const Field& m, std::span<const double> terminal_u,
                  const Params& params, double cfl, kernels::Exec exec) {
    const Grid& grid = m.grid;
    const double dx = grid.dx();
    const double dt = grid.dt();
    Field u(grid, FieldKind::Value);
    std::copy(terminal_u.begin(), terminal_u.end(), u.level(grid.nt).begin());

    std::vector<double> coupling(grid.nx);
    for (int n = grid.nt - 1; n >= 0; --n) {
        const auto u_next = u.level(n + 1);
        check_cfl(dt, kernels::max_abs_gradient(u_next, dx, exec), dx, cfl);
        kernels::power_level(m.level(n + 1), params.theta, coupling, exec);
        kernels::hj_step(u_next, coupling, dx, dt, u.level(n), exec);
    }
    return u;
}

Field transport_forward(std::span<const double> m0, const Field& u,
                        double cfl, double floor, kernels::Exec exec) {
    const Grid& grid = u.grid;
    const double dx = grid.dx();
    const double dt = grid.dt();
    for (double v : m0)
        if (v < 0.0) throw std::domain_error("transport_forward: negative input density");

    Field m(grid, FieldKind::Density);
    std::copy(m0.begin(), m0.end(), m.level(0).begin());
    for (int n = 0; n < grid.nt; ++n) {
        const auto u_level = u.level(n);
        check_cfl(dt, kernels::max_abs_gradient(u_level, dx, exec), dx, cfl);
        kernels::transport_step(m.level(n), u_level, dx, dt, floor, m.level(n + 1), exec);
    }
    return m;
}

double velocity_scale(std::span<const double> m0, const Params& params,
                      const Grid& grid) {
    const SelfSimilarProfile prof =
        SelfSimilarProfile::make(discrete_mass(m0, grid.dx()), params.theta);
    const DataShape s = shape_of(m0, prof, grid);
    const double t_ref = std::max(s.t_matched, 1e-3);
    const double v_data =
        prof.alpha * prof.support_half_width * std::pow(t_ref, prof.alpha - 1.0);
    return 2.0 * v_data + 0.5;
}

SolveResult solve_terminal_cost(std::span<const double> m0, const Params& params,
                                const Grid& grid, const SolveOptions& opt) {
    validate_density_trace(m0, grid, "solve_terminal_cost");
    if (opt.algorithm == SolveAlgorithm::VariationalDual)
        return solve_dual(m0, {}, params, grid, opt);
    return solve_terminal_cost_splitting(m0, params, grid, opt);
}

SolveResult solve_planning(std::span<const double> m0, std::span<const double> mT,
                           const Params& params, const Grid& grid,
                           const SolveOptions& opt) {
    validate_density_trace(m0, grid, "solve_planning");
    validate_density_trace(mT, grid, "solve_planning");
    const double dx = grid.dx();
    const double mass0 = discrete_mass(m0, dx);
    const double massT = discrete_mass(mT, dx);
    if (std::abs(mass0 - massT) > 1e-10 * std::max(mass0, massT))
        throw std::domain_error(
            "solve_planning: marginals must carry equal mass (compatibility condition)");

    SolveResult result = opt.algorithm == SolveAlgorithm::VariationalDual
                             ? solve_dual(m0, mT, params, grid, opt)
                             : solve_planning_splitting(m0, mT, params, grid, opt);
    normalize_planning_value(result.u, result.m);
    return result;
}

std::vector<double> make_bump_initial(double a0, double b0, double mass,
                                      double theta, const Grid& grid) {
    if (!(a0 < b0)) throw std::domain_error("make_bump_initial: need a0 < b0");
    if (!(grid.x_min < a0 && b0 < grid.x_max))
        throw std::domain_error("make_bump_initial: bump must sit inside the domain");
    if (!(mass > 0.0)) throw std::domain_error("make_bump_initial: mass must be positive");

    const double inv_theta = 1.0 / theta;
    auto shape = [&](double x) {
        const double q = (x - a0) * (b0 - x);
        return q > 0.0 ? std::pow(q, inv_theta) : 0.0;
    };
    const double unit_mass = adaptive_simpson(shape, a0, b0, 1e-13 * mass);
    const double c = std::pow(mass / unit_mass, theta);
    const double scale = std::pow(c, inv_theta);

    std::vector<double> m0(grid.nx, 0.0);
    for (int i = 0; i < grid.nx; ++i) m0[i] = scale * shape(grid.x_center(i));
    return m0;
}

Field sample_self_similar_density(const SelfSimilarProfile& p, const Grid& grid,
                                  double t_offset) {
    Field m(grid, FieldKind::Density);
    for (int n = 0; n <= grid.nt; ++n) {
        const double t = t_offset + grid.time(n);
        auto row = m.level(n);
        for (int i = 0; i < grid.nx; ++i) row[i] = p.eval(grid.x_center(i), t).m;
    }
    return m;
}

Field sample_self_similar_value(const SelfSimilarProfile& p, const Grid& grid,
                                double t_offset) {
    Field u(grid, FieldKind::Value);
    const double shw = p.support_half_width;
    for (int n = 0; n <= grid.nt; ++n) {
        const double t = t_offset + grid.time(n);
        const double scale = std::pow(t, 2.0 * p.alpha - 1.0);
        const double zt = p.z(t);
        const double edge = p.support_edge(t);
        const double u_edge = scale * (-0.5 * p.alpha * shw * shw) + zt;
        const double ux_edge = p.alpha * edge / t;  // magnitude at the edge
        auto row = u.level(n);
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.x_center(i);
            if (std::abs(x) <= edge) {
                const double eta = x / std::pow(t, p.alpha);
                row[i] = scale * (-0.5 * p.alpha * eta * eta) + zt;
            } else {
                // C1 continuation with the edge slope; the optimal exterior
                // trajectories make u linear there to first order
                const double e = x > 0 ? edge : -edge;
                const double slope = x > 0 ? -ux_edge : ux_edge;
                row[i] = u_edge + slope * (x - e);
            }
        }
    }
    return u;
}

} // namespace mfg
