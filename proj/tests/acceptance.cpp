// Acceptance suite: end-to-end property checks of the solver against the
// closed-form spreading solution and the quantitative decay laws, at desk
// scale. One test case per criterion; each prints a PASS/FAIL line.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mfglab/diagnostics.hpp"
#include "mfglab/lagrangian.hpp"
#include "mfglab/rescaling.hpp"
#include "mfglab/solver.hpp"

using namespace mfg;

namespace {

void report(int crit, const std::string& what, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", crit,
                what.c_str(), detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "criterion ", crit, ": ", what, " — ", detail);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Run {
    Params params;
    Grid grid;
    SelfSimilarProfile profile;
    std::vector<double> m0;
    SolveResult sol;
    double wall_seconds = 0.0;
};

Grid make_domain(double theta, double t0, double t1, int nx) {
    const double x_max = 3.0 * (1.0 + std::pow(t1, alpha_of(theta)));
    return Grid::make(-x_max, x_max, nx, t0, t1, 16);  // nt set by the solver path
}

Run tc_profile_run(double theta, double t1, int nx, double tol) {
    Run r{Params::make(theta, 1.0, t1 - 1.0, 1.0 / (1.0 - alpha_of(theta)),
                       Variant::TerminalCost),
          make_domain(theta, 1.0, t1, nx), SelfSimilarProfile::make(1.0, theta),
          {}, {}, 0.0};
    r.m0.resize(nx);
    for (int i = 0; i < nx; ++i) r.m0[i] = r.profile.eval(r.grid.x_center(i), 1.0).m;
    SolveOptions opt;
    opt.tol = tol;
    opt.max_iter = 500;
    r.sol = solve_terminal_cost(r.m0, r.params, r.grid, opt);
    r.wall_seconds = r.sol.report.wall_time_seconds;
    return r;
}

Run tc_bump_run(double theta, double horizon, int nx, double tol, int max_iter = 500) {
    Run r{Params::make(theta, 1.0, horizon, 1.0 / (1.0 - alpha_of(theta)),
                       Variant::TerminalCost),
          make_domain(theta, 0.0, horizon, nx), SelfSimilarProfile::make(1.0, theta),
          {}, {}, 0.0};
    r.m0 = make_bump_initial(-1.0, 1.0, 1.0, theta, r.grid);
    SolveOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    r.sol = solve_terminal_cost(r.m0, r.params, r.grid, opt);
    r.wall_seconds = r.sol.report.wall_time_seconds;
    return r;
}

double max_l1_error_vs_profile(const Run& r) {
    const Grid& g = r.sol.m.grid;
    double worst = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
        double l1 = 0.0;
        for (int i = 0; i < g.nx; ++i)
            l1 += std::abs(r.sol.m.at(n, i) - r.profile.eval(g.x_center(i), g.time(n)).m);
        worst = std::max(worst, l1 * g.dx());
    }
    return worst;
}

double max_mass_drift(const Field& m) {
    const double dx = m.grid.dx();
    const double mass0 = discrete_mass(m.level(0), dx);
    double worst = 0.0;
    for (int n = 0; n <= m.grid.nt; ++n)
        worst = std::max(worst,
                         std::abs(discrete_mass(m.level(n), dx) - mass0) / mass0);
    return worst;
}

RescaledState rescale_run(const Run& r, double t_lo, double t_hi, int ntau = 101,
                          int neta = 801) {
    std::vector<double> tau(ntau), eta(neta);
    for (int j = 0; j < ntau; ++j)
        tau[j] = std::log(t_lo) + (std::log(t_hi) - std::log(t_lo)) * j / (ntau - 1);
    const double eta_max = 2.0 * r.profile.support_half_width;
    for (int i = 0; i < neta; ++i) eta[i] = -eta_max + 2.0 * eta_max * i / (neta - 1);
    return rescale(r.sol.u, r.sol.m, r.params, tau, eta);
}

// ---- shared runs (built lazily, reused across criteria) --------------------

const Run& runA() {  // criterion 1/9/12 base: profile start, theta 2, [1,10]
    static const Run r = tc_profile_run(2.0, 10.0, 2048, 1e-5);
    return r;
}
const Run& runA_fine() {
    static const Run r = tc_profile_run(2.0, 10.0, 4096, 1e-5);
    return r;
}
const Run& runB() {  // criterion 3/4/7/8/9/10 base: bump, theta 2, T = 200
    static const Run r = tc_bump_run(2.0, 200.0, 2048, 2e-5);
    return r;
}
const Run& runB_coarse() {
    static const Run r = tc_bump_run(2.0, 200.0, 1024, 2e-5);
    return r;
}
const Run& runC1() {  // theta = 1 long run (criteria 5, 6)
    static const Run r = tc_bump_run(1.0, 200.0, 1536, 2e-5);
    return r;
}
const Run& runC4_50() {  // theta = 4 runs (criteria 5, 11)
    static const Run r = tc_bump_run(4.0, 50.0, 2048, 2e-5);
    return r;
}
const Run& runC4_100() {
    static const Run r = tc_bump_run(4.0, 100.0, 2048, 2e-5);
    return r;
}

} // namespace

TEST_CASE("criterion 1: terminal-cost run follows the spreading solution") {
    const Run& r = runA();
    const double err = max_l1_error_vs_profile(r);
    report(1, "max-in-time L1 distance to the closed form", err <= 5e-3,
           fmt(err) + " <= 5e-3");
    const double err_fine = max_l1_error_vs_profile(runA_fine());
    report(1, "halving dx improves the error by at least 1.7x",
           err / err_fine >= 1.7, fmt(err) + " / " + fmt(err_fine) + " = " +
                                      fmt(err / err_fine));
    report(1, "runtime within two minutes", r.wall_seconds <= 120.0,
           fmt(r.wall_seconds) + " s");
    report(1, "solver reports convergence", r.sol.report.converged,
           "iterations " + std::to_string(r.sol.report.iterations));
}

TEST_CASE("criterion 2: planning run bridges the two marginals") {
    const Run& base = runA();
    const Grid& grid = base.grid;
    std::vector<double> m0(grid.nx), mT(grid.nx);
    for (int i = 0; i < grid.nx; ++i) {
        m0[i] = base.profile.eval(grid.x_center(i), 1.0).m;
        mT[i] = base.profile.eval(grid.x_center(i), 10.0).m;
    }
    const double scale = discrete_mass(m0, grid.dx()) / discrete_mass(mT, grid.dx());
    for (double& v : mT) v *= scale;
    const auto params = Params::make(2.0, 1.0, 9.0, 2.0, Variant::Planning);
    SolveOptions opt;
    opt.tol = 1e-3;
    opt.max_iter = 500;
    const SolveResult sol = solve_planning(m0, mT, params, grid, opt);

    const double gap = l1_distance(sol.m.level(sol.m.grid.nt), mT, grid.dx());
    report(2, "terminal L1 gap at convergence", gap <= 1e-3, fmt(gap) + " <= 1e-3");

    double interior = 0.0;
    const Grid& g = sol.m.grid;
    for (int n = 0; n <= g.nt; ++n) {
        double l1 = 0.0;
        for (int i = 0; i < g.nx; ++i)
            l1 += std::abs(sol.m.at(n, i) - base.profile.eval(g.x_center(i), g.time(n)).m);
        interior = std::max(interior, l1 * g.dx());
    }
    report(2, "interior L1 distance to the exact bridge", interior <= 1e-2,
           fmt(interior) + " <= 1e-2");
}

TEST_CASE("criterion 3: bump data approaches the spreading solution") {
    const Run& r = runB();
    const std::vector<double> ts = geometric_times(r.sol.m.grid, 10.0, 100.0);
    const auto rows = convergence_metrics(r.sol.m, r.sol.u, r.profile, 1.0, ts);
    bool monotone = true;
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (rows[k].D1 > 1.05 * rows[k - 1].D1) monotone = false;
    report(3, "scaled L1 deviation decreases on [10,100] (5% slack)", monotone,
           "D1 head " + fmt(rows.front().D1) + ", tail " + fmt(rows.back().D1));
    report(3, "tail-to-head decay of at least 10x",
           rows.back().D1 <= 0.1 * rows.front().D1,
           fmt(rows.back().D1) + " <= 0.1 * " + fmt(rows.front().D1));

    auto sup_metric = [&](double t) {
        const Grid& g = r.sol.m.grid;
        const int n = static_cast<int>(std::lround((t - g.t0) / g.dt()));
        double sup = 0.0;
        for (int i = 0; i < g.nx; ++i)
            sup = std::max(sup, std::abs(r.sol.m.at(n, i) -
                                         r.profile.eval(g.x_center(i), g.time(n)).m));
        return std::pow(g.time(n), r.params.alpha) * sup;
    };
    const double s10 = sup_metric(10.0), s100 = sup_metric(100.0);
    report(3, "scaled sup-norm deviation drops by at least 5x", s100 * 5.0 <= s10,
           fmt(s10) + " -> " + fmt(s100));
}

TEST_CASE("criterion 4: energy derivative identity on the bump run") {
    auto median_mismatch = [](const Run& r) {
        const RescaledState st = rescale_run(r, 5.0, 100.0);
        const LyapunovTrace tr = lyapunov(st, r.profile);
        std::vector<double> ratios;
        for (std::size_t j = 1; j + 1 < tr.tau.size(); ++j)
            ratios.push_back(std::abs(tr.dE_numeric[j] - tr.dE_formula[j]) /
                             (std::abs(tr.dE_formula[j]) + 1e-6));
        std::sort(ratios.begin(), ratios.end());
        return ratios[ratios.size() / 2];
    };
    const double med = median_mismatch(runB());
    const double med_coarse = median_mismatch(runB_coarse());
    report(4, "median derivative mismatch within 0.15", med <= 0.15,
           fmt(med) + " <= 0.15");
    report(4, "mismatch decreases under mesh refinement", med <= med_coarse,
           fmt(med_coarse) + " -> " + fmt(med));
}

TEST_CASE("criterion 5: energy sign dichotomy across the critical exponent") {
    const RescaledState s1 = rescale_run(runC1(), 5.0, 100.0);
    const LyapunovTrace t1 = lyapunov(s1, runC1().profile);
    double min1 = 1e300;
    for (double e : t1.E) min1 = std::min(min1, e);
    report(5, "theta = 1 energy stays nonnegative", min1 >= -1e-6,
           "min E = " + fmt(min1));

    const RescaledState s4 = rescale_run(runC4_100(), 5.0, 50.0);
    const LyapunovTrace t4 = lyapunov(s4, runC4_100().profile);
    double max4 = -1e300;
    for (double e : t4.E) max4 = std::max(max4, e);
    report(5, "theta = 4 energy stays nonpositive", max4 <= 1e-6,
           "max E = " + fmt(max4));
}

TEST_CASE("criterion 6: supercritical exponential decay rate") {
    const RescaledState st = rescale_run(runC1(), 10.0, 100.0);
    const LyapunovTrace tr = lyapunov(st, runC1().profile);
    ExpRateFit fit{0.0, 0.0};
    std::string note;
    try {
        fit = fit_exponential_rate(tr, std::log(10.0), std::log(100.0));
        note = "k = " + fmt(fit.k_fit) + ", r2 = " + fmt(fit.r_squared);
    } catch (const std::exception& e) {
        note = e.what();
    }
    report(6, "fitted decay constant within [0.27, 0.40] (target 1/3)",
           fit.k_fit >= 0.27 && fit.k_fit <= 0.40, note);
    report(6, "log-linear fit quality r2 >= 0.98", fit.r_squared >= 0.98, note);
}

TEST_CASE("criterion 7: free boundary growth and convexity") {
    const Run& r = runB();
    const FreeBoundary fb = extract_free_boundary(r.sol.m, r.params.theta);
    const FreeBoundaryRates rates = free_boundary_rates(fb, r.params, 5.0, 100.0);
    report(7, "position growth exponent within 0.05 of 1/2",
           std::abs(rates.position.exponent_fit - r.params.alpha) <= 0.05,
           "slope " + fmt(rates.position.exponent_fit));
    report(7, "left curve convex, right curve concave at interior samples",
           rates.left_convex && rates.right_concave,
           "min left " + fmt(rates.min_left_curvature) + ", max right " +
               fmt(rates.max_right_curvature));
}

TEST_CASE("criterion 8: density and gradient decay exponents") {
    const Run& r = runB();
    const SmoothingReport sm = smoothing_check(r.sol.m, r.params, 5.0, 100.0);
    report(8, "density sup-norm exponent within 0.05 of -alpha",
           std::abs(sm.fit.exponent_fit + r.params.alpha) <= 0.05,
           "slope " + fmt(sm.fit.exponent_fit));
    const GradientRates gr = gradient_rate_check(r.sol.u, r.params, 5.0, 100.0);
    report(8, "gradient sup-norm exponent within 0.05 of alpha-1",
           std::abs(gr.space.exponent_fit - (r.params.alpha - 1.0)) <= 0.05,
           "slope " + fmt(gr.space.exponent_fit));
}

TEST_CASE("criterion 9: conservation and structural identities") {
    double worst_drift = 0.0;
    for (const Run* r : {&runA(), &runB(), &runC1(), &runC4_50(), &runC4_100()})
        worst_drift = std::max(worst_drift, max_mass_drift(r->sol.m));
    report(9, "discrete mass constant to 1e-12 on every run", worst_drift <= 1e-12,
           "worst relative drift " + fmt(worst_drift));

    const DriftReport h = hamiltonian_conservation(runB().sol.u, runB().sol.m, 2.0);
    const DriftReport h_coarse =
        hamiltonian_conservation(runB_coarse().sol.u, runB_coarse().sol.m, 2.0);
    report(9, "energy functional drift within 1e-2", h.max_relative_drift <= 1e-2,
           fmt(h.max_relative_drift));
    report(9, "drift shrinks under refinement",
           h.max_relative_drift < h_coarse.max_relative_drift,
           fmt(h_coarse.max_relative_drift) + " -> " + fmt(h.max_relative_drift));

    // flow mass identity gamma_x * m(gamma) = m0 on tracked trajectories
    const Run& a = runA();
    std::vector<double> sources;
    const double edge0 = a.profile.support_edge(a.grid.t0);
    for (double f = -0.85; f <= 0.8501; f += 0.05) sources.push_back(f * edge0);
    const FlowField flow = integrate_flow(a.sol.u, sources);
    double worst_rel = 0.0;
    for (int s = 0; s < flow.ns(); ++s) {
        const double m0_here = a.profile.eval(sources[s], a.grid.t0).m;
        for (int n = 0; n < flow.ntimes(); n += 50) {
            const double lhs =
                flow.gx(s, n) * a.sol.m.interp(flow.g(s, n), flow.t_samples[n]);
            worst_rel = std::max(worst_rel, std::abs(lhs - m0_here) / m0_here);
        }
    }
    report(9, "flow mass identity within 2e-2 along trajectories", worst_rel <= 2e-2,
           "worst relative error " + fmt(worst_rel));
}

TEST_CASE("criterion 10: critical-case pairing functional decays") {
    const Run& r = runB();
    const RescaledState st = rescale_run(r, 10.0, 100.0, 51);
    const CriticalTrace ct = critical_functional(st, r.profile);
    bool nonincreasing = true;
    double worst_rise = 0.0;
    for (std::size_t j = 1; j < ct.f.size(); ++j) {
        worst_rise = std::max(worst_rise, ct.f[j] - ct.f[j - 1]);
        if (ct.f[j] > ct.f[j - 1] + 1e-6) nonincreasing = false;
    }
    report(10, "pairing functional nonincreasing up to 1e-6", nonincreasing,
           "worst rise " + fmt(worst_rise));
    const double head = std::abs(ct.f.front());
    const double tail = std::abs(ct.f.back());
    report(10, "decade decay of the pairing functional", tail <= 0.1 * head,
           fmt(head) + " -> " + fmt(tail));
}

TEST_CASE("criterion 11: two-horizon agreement in the subcritical range") {
    const Run& r50 = runC4_50();
    const Run& r100 = runC4_100();
    // compare on the common window t in [0,10], x in the smaller domain
    const Grid& g = r50.sol.m.grid;
    const int n_hi = static_cast<int>(std::lround(10.0 / g.dt()));
    double worst_l1 = 0.0, worst_u = 0.0;
    for (int n = 0; n <= n_hi; n += 5) {
        const double t = g.time(n);
        double l1 = 0.0;
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x_center(i);
            l1 += std::abs(r50.sol.m.at(n, i) - r100.sol.m.interp(x, t));
            worst_u = std::max(worst_u, std::abs(r50.sol.u.at(n, i) -
                                                 r100.sol.u.interp(x, t)));
        }
        worst_l1 = std::max(worst_l1, l1 * g.dx());
    }
    report(11, "densities agree within 2e-2 on [0,10]", worst_l1 <= 2e-2,
           fmt(worst_l1));
    report(11, "value functions agree within 5e-2 on [0,10]", worst_u <= 5e-2,
           fmt(worst_u));
}

TEST_CASE("criterion 12: structure of the exterior optimal trajectories") {
    const Run& r = runA();
    const FreeBoundary fb = extract_free_boundary(r.sol.m, r.params.theta);
    const Grid& g = r.grid;
    const double dx = g.dx();
    auto at = [&](const std::vector<double>& tr, double t) {
        return tr[static_cast<int>(std::lround((t - g.t0) / g.dt()))];
    };
    const double gl_T = fb.left.back();
    const double slope_T = (fb.left.back() - at(fb.left, g.t1 - 1.0)) / 1.0;

    std::vector<std::pair<double, double>> probes;
    for (double tp : {2.0, 3.5, 5.0, 6.5}) {
        const double gl_tp = at(fb.left, tp);
        const double line_tp = gl_T + slope_T * (tp - g.t1);
        for (double x : {gl_T - 2.0, 0.5 * (gl_T + line_tp),
                         0.55 * line_tp + 0.45 * gl_tp}) {
            probes.push_back({x, tp});
            probes.push_back({-x, tp});  // mirrored probes on the right side
        }
    }
    const auto reports = check_vanishing_trajectories(r.sol.u, fb, probes);
    int confirmed = 0, bound_ok = 0;
    double worst_residual = 0.0;
    for (const auto& p : reports) {
        confirmed += p.confirmed ? 1 : 0;
        bound_ok += p.gradient_bound_ok ? 1 : 0;
        worst_residual = std::max(worst_residual, p.linear_residual);
    }
    report(12, "at least 20 probes all classify and confirm",
           reports.size() >= 20 && confirmed == static_cast<int>(reports.size()),
           std::to_string(confirmed) + "/" + std::to_string(reports.size()) +
               " confirmed");
    report(12, "straight-segment residual within 2 dx", worst_residual <= 2.0 * dx,
           fmt(worst_residual) + " <= " + fmt(2.0 * dx));
    report(12, "boundary-speed bound holds at every probe",
           bound_ok == static_cast<int>(reports.size()),
           std::to_string(bound_ok) + "/" + std::to_string(reports.size()));
}
