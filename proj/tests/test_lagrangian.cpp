#include <doctest.h>

#include <cmath>

#include "mfglab/lagrangian.hpp"
#include "mfglab/solver.hpp"
#include "run_cache.hpp"

using namespace mfg;

TEST_CASE("constant value field freezes the flow") {
    const Grid grid = Grid::make(-2.0, 2.0, 128, 0.0, 1.0, 50);
    Field u(grid, FieldKind::Value);
    for (auto& v : u.data) v = 3.0;
    std::vector<double> sources = {-0.8, -0.1, 0.3, 0.9};
    const FlowField flow = integrate_flow(u, sources);
    for (int s = 0; s < flow.ns(); ++s)
        for (int n = 0; n < flow.ntimes(); ++n)
            CHECK(flow.g(s, n) == doctest::Approx(sources[s]).epsilon(1e-14));
}

TEST_CASE("self-similar flow is the dilation x (t/t0)^alpha") {
    const auto prof = SelfSimilarProfile::make(1.0, 2.0);
    const double t0 = 1.0, t1 = 4.0;
    const Grid grid = Grid::make(-9.0, 9.0, 1024, t0, t1, 600);
    const Field u = sample_self_similar_value(prof, grid);
    std::vector<double> sources;
    for (double x = -1.0; x <= 1.0; x += 0.2) sources.push_back(x);
    const FlowField flow = integrate_flow(u, sources);
    for (int s = 0; s < flow.ns(); ++s) {
        for (int n = 0; n < flow.ntimes(); n += 60) {
            const double expect =
                sources[s] * std::pow(grid.time(n) / t0, prof.alpha);
            CHECK(std::abs(flow.g(s, n) - expect) < 4e-3);
        }
        CHECK(flow.g(s, 0) == doctest::Approx(sources[s]).epsilon(1e-14));
    }
    // no crossing
    for (int n = 0; n < flow.ntimes(); ++n)
        for (int s = 1; s < flow.ns(); ++s) CHECK(flow.g(s, n) > flow.g(s - 1, n));
}

TEST_CASE("mass identity along exact trajectories") {
    const auto prof = SelfSimilarProfile::make(1.0, 2.0);
    const double t0 = 1.0, t1 = 4.0;
    const Grid grid = Grid::make(-9.0, 9.0, 1024, t0, t1, 600);
    const Field u = sample_self_similar_value(prof, grid);
    const Field m = sample_self_similar_density(prof, grid);
    std::vector<double> sources;
    for (double x = -1.0; x <= 1.0001; x += 0.125) sources.push_back(x);
    const FlowField flow = integrate_flow(u, sources);
    for (int s = 1; s + 1 < flow.ns(); ++s) {
        const double m0_here = prof.eval(sources[s], t0).m;
        for (int n = 0; n < flow.ntimes(); n += 100) {
            const double lhs =
                flow.gx(s, n) * m.interp(flow.g(s, n), flow.t_samples[n]);
            CHECK(lhs == doctest::Approx(m0_here).epsilon(2e-2));
        }
    }
    // flow growth: |gamma| / (1 + t^alpha) bounded
    double worst = 0.0;
    for (int s = 0; s < flow.ns(); ++s)
        for (int n = 0; n < flow.ntimes(); ++n)
            worst = std::max(worst, std::abs(flow.g(s, n)) /
                                        (1.0 + std::pow(flow.t_samples[n], prof.alpha)));
    CHECK(worst < 2.0);
}

TEST_CASE("free boundary of the exact density") {
    const auto prof = SelfSimilarProfile::make(1.0, 2.0);
    const Grid grid = Grid::make(-9.0, 9.0, 1024, 1.0, 4.0, 300);
    const Field m = sample_self_similar_density(prof, grid);
    const FreeBoundary fb = extract_free_boundary(m, 2.0);
    for (int n = 0; n < grid.nt; n += 30) {
        const double edge = prof.support_edge(grid.time(n));
        CHECK(std::abs(fb.right[n] - edge) < 3e-3);
        CHECK(fb.left[n] == doctest::Approx(-fb.right[n]).epsilon(1e-10));
        CHECK(fb.left[n] < fb.right[n]);
    }
}

TEST_CASE("free boundary on a sharp box support") {
    const Grid grid = Grid::make(-3.0, 3.0, 300, 0.0, 1.0, 10);
    Field m(grid, FieldKind::Density);
    for (int n = 0; n <= grid.nt; ++n)
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.x_center(i);
            m.at(n, i) = (x > -1.0 && x < 1.0) ? 1.0 : 0.0;
        }
    const FreeBoundary fb = extract_free_boundary(m, 2.0);
    for (int n = 0; n <= grid.nt; ++n) {
        CHECK(std::abs(fb.left[n] + 1.0) <= grid.dx());
        CHECK(std::abs(fb.right[n] - 1.0) <= grid.dx());
    }
}

TEST_CASE("empty support raises with the time index") {
    const Grid grid = Grid::make(-1.0, 1.0, 32, 0.0, 1.0, 4);
    Field m(grid, FieldKind::Density);
    try {
        extract_free_boundary(m, 2.0);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("time index 0") != std::string::npos);
    }
}

TEST_CASE("lagrangian density under the frozen flow is m^theta") {
    const Grid grid = Grid::make(-2.0, 2.0, 256, 0.0, 1.0, 40);
    Field u(grid, FieldKind::Value);
    Field m(grid, FieldKind::Density);
    for (int n = 0; n <= grid.nt; ++n)
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.x_center(i);
            m.at(n, i) = std::max(0.0, 1.0 - x * x) * (1.0 + 0.1 * grid.time(n));
        }
    std::vector<double> sources = {-0.9, -0.4, 0.0, 0.5, 0.8};
    const FlowField flow = integrate_flow(u, sources);
    const auto p = lagrangian_density(m, flow, 2.0);
    for (int s = 0; s < flow.ns(); ++s)
        for (int n = 0; n <= grid.nt; n += 10) {
            const double expect = std::pow(m.interp(sources[s], grid.time(n)), 2.0);
            CHECK(p[static_cast<std::size_t>(s) * flow.ntimes() + n] ==
                  doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("edge sources carry vanishing lagrangian density") {
    const auto& run = cache::small_tc_run();
    const double edge = run.profile.support_edge(run.grid.t0);
    std::vector<double> sources = {-edge, 0.0, edge};
    const FlowField flow = integrate_flow(run.sol.u, sources);
    const auto p = lagrangian_density(run.sol.m, flow, 2.0);
    const int last = flow.ntimes() - 1;
    CHECK(p[static_cast<std::size_t>(0) * flow.ntimes() + last] < 5e-3);
    CHECK(p[static_cast<std::size_t>(2) * flow.ntimes() + last] < 5e-3);
    CHECK(p[static_cast<std::size_t>(1) * flow.ntimes() + last] > 0.01);
}

TEST_CASE("harnack ratio of the exact run stays bounded") {
    const auto prof = SelfSimilarProfile::make(1.0, 2.0);
    const Grid grid = Grid::make(-9.0, 9.0, 1024, 1.0, 4.0, 600);
    const Field u = sample_self_similar_value(prof, grid);
    const Field m = sample_self_similar_density(prof, grid);
    std::vector<double> sources;
    for (double x = -1.25; x <= 1.2501; x += 0.05) sources.push_back(x);
    const FlowField flow = integrate_flow(u, sources);
    const HarnackReport rep = harnack_ratio(m, flow, 2.0, 0.5);
    CHECK(rep.rectangles > 0);
    CHECK(rep.worst_ratio < 25.0);
    CHECK(rep.worst_ratio >= 1.0);
}

TEST_CASE("exterior trajectories classify into the three structural cases") {
    const auto& run = cache::small_tc_run();
    const FreeBoundary fb = extract_free_boundary(run.sol.m, 2.0);
    const Grid& grid = run.grid;
    const double t_end = grid.t1;

    // geometry of the left curve at a probe time
    const double tp = 3.0;
    auto at = [&](const std::vector<double>& tr, double t) {
        const int n = static_cast<int>(std::lround((t - grid.t0) / grid.dt()));
        return tr[n];
    };
    const double gl_T = fb.left.back();
    const double slope_T = (fb.left.back() - at(fb.left, t_end - 1.0)) / 1.0;
    const double line_tp = gl_T + slope_T * (tp - t_end);
    // the tangent probe launches early and hugs the curve, so the bent leg is
    // long enough to resolve against the mesh tolerance
    const double tp2 = 2.0;
    const double gl_tp2 = at(fb.left, tp2);
    const double line_tp2 = gl_T + slope_T * (tp2 - t_end);

    std::vector<std::pair<double, double>> probes = {
        {gl_T - 2.0, tp},                        // far left: constant case
        {0.5 * (gl_T + line_tp), tp},            // chord case
        {0.85 * gl_tp2 + 0.15 * line_tp2, tp2},  // tangent case
        {-(gl_T - 2.0), tp},                     // mirrored on the right
    };
    const auto reports = check_vanishing_trajectories(run.sol.u, fb, probes);
    REQUIRE(reports.size() == 4);
    CHECK(reports[0].classified == TrajectoryCase::Constant);
    CHECK(reports[0].confirmed);
    CHECK(std::abs(reports[0].u_x_probe) < 1e-8);  // cost-free region
    CHECK(reports[1].classified == TrajectoryCase::Chord);
    CHECK(reports[1].confirmed);
    CHECK(reports[2].classified == TrajectoryCase::TangentThenBoundary);
    CHECK(reports[2].confirmed);
    CHECK(reports[2].tangency_time > tp2);
    CHECK(reports[2].tangency_time < t_end);
    CHECK(reports[3].classified == TrajectoryCase::Constant);
    for (const auto& r : reports) CHECK(r.gradient_bound_ok);

    CHECK_THROWS_AS(
        check_vanishing_trajectories(
            run.sol.u, fb, std::vector<std::pair<double, double>>{{0.0, tp}}),
        std::domain_error);
}
