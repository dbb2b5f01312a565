#include "mfglab/rescaling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfglab/kernels.hpp"
#include "mfglab/linfit.hpp"

namespace mfg {

namespace {

double trapezoid(std::span<const double> y, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < y.size(); ++i) s += 0.5 * (y[i] + y[i + 1]);
    return s * h;
}

void require_matching(const RescaledState& state, const SelfSimilarProfile& profile) {
    if (state.theta != profile.theta)
        throw std::domain_error("lyapunov: state and profile disagree on theta");
    if (std::abs(state.mass - profile.mass) > 1e-8 * std::max(state.mass, profile.mass))
        throw std::domain_error("lyapunov: state and profile disagree on mass");
}

} // namespace

RescaledState rescale(const Field& u, const Field& m, const Params& params,
                      std::span<const double> tau_samples,
                      std::span<const double> eta_grid) {
    const Grid& grid = m.grid;
    RescaledState st;
    st.theta = params.theta;
    st.alpha = params.alpha;
    st.mass = params.mass;
    st.eta.assign(eta_grid.begin(), eta_grid.end());
    st.tau.assign(tau_samples.begin(), tau_samples.end());
    const int ne = st.n_eta();
    const int ntau = st.n_tau();
    st.mu.assign(static_cast<std::size_t>(ntau) * ne, 0.0);
    st.v.assign(static_cast<std::size_t>(ntau) * ne, 0.0);
    st.w.assign(static_cast<std::size_t>(ntau) * ne, 0.0);

    const double alpha = params.alpha;
    double u_shift = 0.0;
    if (params.theta <= 2.0 && params.variant != Variant::Planning)
        u_shift = u.interp(0.0, 1.0);

    for (int j = 0; j < ntau; ++j) {
        const double t = std::exp(st.tau[j]);
        if (t < grid.t0 * (1.0 - 1e-9) - 1e-12 || t > grid.t1 * (1.0 + 1e-9))
            throw std::domain_error("rescale: tau sample outside the run window");
        const double ta = std::pow(t, alpha);
        const double vu = std::pow(t, 1.0 - 2.0 * alpha);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < ne; ++i) {
            const double x = ta * st.eta[i];
            const double mu = ta * m.interp(x, t);
            const double v = vu * (u.interp(x, t) - u_shift);
            st.mu[st.idx(j, i)] = mu;
            st.v[st.idx(j, i)] = v;
            st.w[st.idx(j, i)] = v + 0.5 * alpha * st.eta[i] * st.eta[i];
        }
    }
    return st;
}

LyapunovTrace lyapunov(const RescaledState& state, const SelfSimilarProfile& profile,
                       double mu_floor) {
    require_matching(state, profile);
    const int ne = state.n_eta();
    const int ntau = state.n_tau();
    const double h = state.eta[1] - state.eta[0];
    const double theta = state.theta;
    const double alpha = state.alpha;
    const double R = profile.R;
    const double cq = 0.5 * alpha * (1.0 - alpha);

    std::vector<double> M(ne), FM(ne);
    for (int i = 0; i < ne; ++i) {
        M[i] = profile.density_profile(state.eta[i]);
        FM[i] = std::pow(M[i], theta + 1.0) / (theta + 1.0);
    }

    LyapunovTrace tr;
    tr.tau = state.tau;
    tr.E.resize(ntau);
    tr.dE_formula.resize(ntau);
    if (theta == 2.0) tr.f_critical.resize(ntau);

    std::vector<double> integrand(ne), kinetic(ne), pairing(ne);
    for (int j = 0; j < ntau; ++j) {
        for (int i = 0; i < ne; ++i) {
            const double mu = state.mu[state.idx(j, i)];
            double weta = 0.0;
            if (mu > mu_floor && i > 0 && i + 1 < ne)
                weta = (state.w[state.idx(j, i + 1)] - state.w[state.idx(j, i - 1)]) /
                       (2.0 * h);
            const double Fmu = std::pow(std::max(mu, 0.0), theta + 1.0) / (theta + 1.0);
            const double entropy_gap =
                Fmu - FM[i] - (R - cq * state.eta[i] * state.eta[i]) * (mu - M[i]);
            kinetic[i] = mu * weta * weta;
            integrand[i] = 0.5 * kinetic[i] - entropy_gap;
            if (theta == 2.0) pairing[i] = state.w[state.idx(j, i)] * (mu - M[i]);
        }
        tr.E[j] = trapezoid(integrand, h);
        tr.dE_formula[j] = (theta - 2.0) / (theta + 2.0) * trapezoid(kinetic, h);
        if (theta == 2.0) tr.f_critical[j] = trapezoid(pairing, h);
    }

    tr.dE_numeric.resize(ntau);
    for (int j = 0; j < ntau; ++j) {
        const int a = std::max(j - 1, 0);
        const int b = std::min(j + 1, ntau - 1);
        tr.dE_numeric[j] = (tr.E[b] - tr.E[a]) / (state.tau[b] - state.tau[a]);
    }
    return tr;
}

CriticalTrace critical_functional(const RescaledState& state,
                                  const SelfSimilarProfile& profile) {
    if (state.theta != 2.0)
        throw std::domain_error("critical_functional: defined only for theta = 2");
    require_matching(state, profile);
    const int ne = state.n_eta();
    const int ntau = state.n_tau();
    const double h = state.eta[1] - state.eta[0];
    const double alpha = state.alpha;
    const double R = profile.R;
    const double cq = 0.5 * alpha * (1.0 - alpha);

    std::vector<double> M(ne);
    for (int i = 0; i < ne; ++i) M[i] = profile.density_profile(state.eta[i]);

    CriticalTrace tr;
    tr.tau = state.tau;
    tr.f.resize(ntau);
    tr.f_prime_formula.resize(ntau);
    std::vector<double> pairing(ne), rhs(ne);
    for (int j = 0; j < ntau; ++j) {
        for (int i = 0; i < ne; ++i) {
            const double mu = state.mu[state.idx(j, i)];
            const double w = state.w[state.idx(j, i)];
            double weta = 0.0;
            if (mu > 1e-8 && i > 0 && i + 1 < ne)
                weta = (state.w[state.idx(j, i + 1)] - state.w[state.idx(j, i - 1)]) /
                       (2.0 * h);
            pairing[i] = w * (mu - M[i]);
            const double press = R - cq * state.eta[i] * state.eta[i];
            rhs[i] = 0.5 * (mu + M[i]) * weta * weta + (mu * mu - press) * (mu - M[i]);
        }
        tr.f[j] = trapezoid(pairing, h);
        tr.f_prime_formula[j] = -trapezoid(rhs, h);
    }
    return tr;
}

std::vector<MetricsRow> convergence_metrics(const Field& m, const Field& u,
                                            const SelfSimilarProfile& profile,
                                            double p,
                                            std::span<const double> t_samples) {
    if (!(p >= 1.0)) throw std::domain_error("convergence_metrics: need p >= 1");
    const Grid& grid = m.grid;
    const double dx = grid.dx();
    const double alpha = profile.alpha;
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;

    std::vector<MetricsRow> rows;
    rows.reserve(t_samples.size());
    std::vector<double> d1(grid.nx), d2(grid.nx), d3(grid.nx);
    for (double t : t_samples) {
        if (t < grid.t0 - 1e-12 || t > grid.t1 * (1.0 + 1e-12))
            throw std::domain_error("convergence_metrics: time outside the run window");
        const int n = static_cast<int>(std::lround((t - grid.t0) / grid.dt()));
        const double tn = grid.time(std::clamp(n, 0, grid.nt));
        const auto mrow = m.level(std::clamp(n, 0, grid.nt));
        const auto urow = u.level(std::clamp(n, 0, grid.nt));
        const std::vector<double> ux = space_derivative(urow, dx);
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.x_center(i);
            const auto ss = profile.eval(x, tn);
            const double ux_ss = -alpha * x / tn;
            const double ut = 0.5 * ux[i] * ux[i] - kernels::power(mrow[i], profile.theta);
            const double ut_ss = profile.value_time_derivative(x, tn);
            d1[i] = mrow[i] - ss.m;
            const double gx = ux[i] - ux_ss;
            d2[i] = mrow[i] * gx * gx;
            d3[i] = mrow[i] * std::abs(ut - ut_ss);
        }
        MetricsRow row;
        row.t = tn;
        row.D1 = std::pow(tn, alpha * (1.0 - inv_p)) * lp_norm(d1, dx, p);
        const double s23 = std::pow(tn, 2.0 - alpha * (1.0 + inv_p));
        row.D2 = s23 * lp_norm(d2, dx, p);
        row.D3 = s23 * lp_norm(d3, dx, p);
        rows.push_back(row);
    }
    return rows;
}

ExpRateFit fit_exponential_rate(const LyapunovTrace& trace, double tau_lo,
                                double tau_hi) {
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < trace.tau.size(); ++j) {
        if (trace.tau[j] < tau_lo || trace.tau[j] > tau_hi) continue;
        if (!(trace.E[j] > 0.0))
            throw std::domain_error(
                "fit_exponential_rate: nonpositive E in window, log fit invalid");
        xs.push_back(trace.tau[j]);
        ys.push_back(std::log(trace.E[j]));
    }
    if (xs.size() < 3)
        throw std::domain_error("fit_exponential_rate: too few samples in window");
    const LineFit f = fit_line(xs, ys);
    return ExpRateFit{-0.5 * f.slope, f.r_squared};
}

} // namespace mfg
