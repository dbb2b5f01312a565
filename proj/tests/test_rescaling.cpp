#include <doctest.h>

#include <cmath>

#include "mfglab/rescaling.hpp"
#include "mfglab/solver.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

struct ExactSetup {
    Params params;
    Grid grid;
    SelfSimilarProfile profile;
    Field u, m;
    std::vector<double> tau, eta;
};

ExactSetup exact_setup(double theta, double t0 = 1.0, double t1 = 16.0) {
    ExactSetup s{Params::make(theta, 1.0, t1 - t0, 1.0 / (1.0 - alpha_of(theta)),
                              Variant::TerminalCost),
                 Grid(), SelfSimilarProfile::make(1.0, theta), Field(), Field(), {}, {}};
    const double x_max = 3.0 * (1.0 + std::pow(t1, s.params.alpha));
    s.grid = Grid::make(-x_max, x_max, 1024, t0, t1, 800);
    s.u = sample_self_similar_value(s.profile.with_terminal_constant(t1), s.grid);
    s.m = sample_self_similar_density(s.profile, s.grid);
    const int ntau = 41;
    for (int j = 0; j < ntau; ++j)
        s.tau.push_back(std::log(t0 * 1.05) +
                        (std::log(t1 * 0.95) - std::log(t0 * 1.05)) * j / (ntau - 1));
    const double eta_max = 2.0 * s.profile.support_half_width;
    const int neta = 601;
    for (int i = 0; i < neta; ++i)
        s.eta.push_back(-eta_max + 2.0 * eta_max * i / (neta - 1));
    return s;
}

} // namespace

TEST_CASE("rescaled exact run is the stationary profile") {
    const auto s = exact_setup(2.0);
    const RescaledState st = rescale(s.u, s.m, s.params, s.tau, s.eta);
    const double h = s.eta[1] - s.eta[0];
    for (int j = 0; j < st.n_tau(); j += 8) {
        double mass = 0.0, l1 = 0.0;
        for (int i = 0; i < st.n_eta(); ++i) {
            const double mu = st.mu[st.idx(j, i)];
            // pointwise away from the cusp edge, where interpolation is clean
            if (std::abs(st.eta[i]) < 0.9 * s.profile.support_half_width)
                CHECK(std::abs(mu - s.profile.density_profile(st.eta[i])) < 4e-3);
            l1 += std::abs(mu - s.profile.density_profile(st.eta[i]));
            mass += mu;
        }
        CHECK(l1 * h < 6e-3);
        CHECK(mass * h == doctest::Approx(1.0).epsilon(2e-3));
        // w is flat where the density lives
        for (int i = 2; i + 2 < st.n_eta(); ++i) {
            if (st.mu[st.idx(j, i)] < 0.05) continue;
            const double weta =
                (st.w[st.idx(j, i + 1)] - st.w[st.idx(j, i - 1)]) / (2.0 * h);
            CHECK(std::abs(weta) < 2e-2);
        }
    }
    CHECK_THROWS_AS(rescale(s.u, s.m, s.params, std::vector<double>{std::log(100.0)},
                            s.eta),
                    std::domain_error);
}

TEST_CASE("energy functional vanishes on the profile and checks its inputs") {
    const auto s = exact_setup(2.0);
    const RescaledState st = rescale(s.u, s.m, s.params, s.tau, s.eta);
    const LyapunovTrace tr = lyapunov(st, s.profile);
    for (int j = 0; j < st.n_tau(); ++j) {
        CHECK(std::abs(tr.E[j]) < 2e-4);          // zero at the profile
        CHECK(tr.dE_formula[j] == 0.0);           // (theta-2)/(theta+2) = 0
    }
    CHECK(tr.f_critical.size() == tr.tau.size()); // critical pairing present
    for (double f : tr.f_critical) CHECK(std::abs(f) < 2e-3);

    const auto wrong_mass = SelfSimilarProfile::make(2.0, 2.0);
    CHECK_THROWS_AS(lyapunov(st, wrong_mass), std::domain_error);
    const auto wrong_theta = SelfSimilarProfile::make(1.0, 3.0);
    CHECK_THROWS_AS(lyapunov(st, wrong_theta), std::domain_error);
}

TEST_CASE("entropy gap integrand is nonnegative at theta below and above 2") {
    for (double theta : {1.0, 4.0}) {
        const auto s = exact_setup(theta, 1.0, 12.0);
        const RescaledState st = rescale(s.u, s.m, s.params, s.tau, s.eta);
        const auto prof = s.profile;
        const double cq = 0.5 * prof.alpha * (1.0 - prof.alpha);
        // F(mu) - F(M) - (R - c eta^2)(mu - M) >= 0 pointwise
        double worst = 0.0;
        for (int j = 0; j < st.n_tau(); j += 10)
            for (int i = 0; i < st.n_eta(); ++i) {
                const double mu = st.mu[st.idx(j, i)];
                const double M = prof.density_profile(st.eta[i]);
                const double F = [&](double v) {
                    return std::pow(std::max(v, 0.0), theta + 1.0) / (theta + 1.0);
                }(mu) - std::pow(M, theta + 1.0) / (theta + 1.0);
                const double gap =
                    F - (prof.R - cq * st.eta[i] * st.eta[i]) * (mu - M);
                worst = std::min(worst, gap);
            }
        CHECK(worst > -1e-9);
    }
}

TEST_CASE("critical pairing functional checks theta and vanishes at the profile") {
    const auto s = exact_setup(2.0);
    const RescaledState st = rescale(s.u, s.m, s.params, s.tau, s.eta);
    const CriticalTrace ct = critical_functional(st, s.profile);
    for (double f : ct.f) CHECK(std::abs(f) < 2e-3);

    const auto s1 = exact_setup(1.0, 1.0, 12.0);
    const RescaledState st1 = rescale(s1.u, s1.m, s1.params, s1.tau, s1.eta);
    CHECK_THROWS_AS(critical_functional(st1, s1.profile), std::domain_error);
}

TEST_CASE("convergence metrics vanish on the exact pair") {
    const auto s = exact_setup(2.0);
    std::vector<double> ts = {2.0, 4.0, 8.0, 15.0};
    for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
        const auto rows = convergence_metrics(s.m, s.u, s.profile, p, ts);
        for (const auto& r : rows) {
            CHECK(r.D1 < 6e-2);  // edge cells only; inf-norm picks the cusp cell
            CHECK(r.D2 < 2e-2);
            CHECK(r.D3 < 6e-2);
        }
    }
    CHECK_THROWS_AS(
        convergence_metrics(s.m, s.u, s.profile, 1.0, std::vector<double>{99.0}),
        std::domain_error);
    CHECK_THROWS_AS(
        convergence_metrics(s.m, s.u, s.profile, 0.5, std::vector<double>{2.0}),
        std::domain_error);
}

TEST_CASE("infinity-norm metric matches the direct formula") {
    const auto s = exact_setup(2.0);
    // perturb the density so D1 is nonzero, then compare to a hand computation
    Field m2 = s.m;
    for (int n = 0; n <= s.grid.nt; ++n)
        for (int i = 0; i < s.grid.nx; ++i)
            m2.at(n, i) *= 1.0 + 0.05 * std::sin(0.3 * s.grid.x_center(i));
    const double t = 4.0;
    const auto rows = convergence_metrics(
        m2, s.u, s.profile, std::numeric_limits<double>::infinity(), std::vector<double>{t});
    const int n = static_cast<int>(std::lround((t - s.grid.t0) / s.grid.dt()));
    double sup = 0.0;
    for (int i = 0; i < s.grid.nx; ++i)
        sup = std::max(sup, std::abs(m2.at(n, i) -
                                     s.profile.eval(s.grid.x_center(i), s.grid.time(n)).m));
    CHECK(rows[0].D1 ==
          doctest::Approx(std::pow(s.grid.time(n), 0.5) * sup).epsilon(1e-12));
}

TEST_CASE("exponential rate fit recovers a synthetic decay") {
    LyapunovTrace tr;
    for (int j = 0; j <= 50; ++j) {
        const double tau = 1.0 + 0.1 * j;
        tr.tau.push_back(tau);
        tr.E.push_back(std::exp(-2.0 * 0.25 * tau));
    }
    const ExpRateFit fit = fit_exponential_rate(tr, 1.0, 6.0);
    CHECK(fit.k_fit == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    tr.E[10] = -1.0;
    CHECK_THROWS_AS(fit_exponential_rate(tr, 1.0, 6.0), std::domain_error);
}

TEST_CASE("rate targets for the dichotomy constant") {
    CHECK(Params::make(1.0, 1.0, 1.0, 1.0, Variant::TerminalCost).rate_k() ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(Params::make(2.0 / 3.0, 1.0, 1.0, 1.0, Variant::TerminalCost).rate_k() ==
          doctest::Approx(0.5).epsilon(1e-12));
}
