#pragma once

#include <span>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/params.hpp"
#include "mfglab/profile.hpp"

namespace mfg {

/// Fields in the zoomed variables eta = x t^{-alpha}, tau = log t:
///   mu(eta,tau) = t^alpha m(x,t),   v(eta,tau) = t^{1-2 alpha} u(x,t),
///   w = v + (alpha/2) eta^2.
/// The self-similar pair becomes a stationary profile here. Rows are tau
/// samples, columns the eta lattice.
struct RescaledState {
    double theta = 0.0, alpha = 0.0, mass = 0.0;
    std::vector<double> eta;
    std::vector<double> tau;
    std::vector<double> mu, v, w;  // n_tau x n_eta

    int n_eta() const { return static_cast<int>(eta.size()); }
    int n_tau() const { return static_cast<int>(tau.size()); }
    std::size_t idx(int j, int i) const {
        return static_cast<std::size_t>(j) * n_eta() + i;
    }
};

/// Samples the continuous rescaling of a solver run by interpolation.
/// For theta <= 2 (terminal-cost and long-horizon runs) the value function is
/// first shifted by u(0,1); planning runs keep the solver normalization.
/// tau samples outside the run window raise a domain error.
RescaledState rescale(const Field& u, const Field& m, const Params& params,
                      std::span<const double> tau_samples,
                      std::span<const double> eta_grid);

/// Energy-entropy gap against the stationary profile of the same mass,
///   E(tau) = integral of (1/2) mu w_eta^2
///            - [F(mu) - F(M) - (R - alpha(1-alpha)/2 eta^2)(mu - M)],
/// with F(s) = s^{theta+1}/(theta+1), by trapezoid quadrature. w_eta uses
/// centered differences where mu exceeds `mu_floor` and is zero elsewhere.
/// dE_numeric is the raw centered difference in tau (no smoothing);
/// dE_formula = (theta-2)/(theta+2) * integral of mu w_eta^2.
/// f_critical carries the theta=2 pairing functional when theta == 2.
struct LyapunovTrace {
    std::vector<double> tau;
    std::vector<double> E;
    std::vector<double> dE_numeric;
    std::vector<double> dE_formula;
    std::vector<double> f_critical;  // empty unless theta == 2
};

LyapunovTrace lyapunov(const RescaledState& state, const SelfSimilarProfile& profile,
                       double mu_floor = 1e-8);

/// theta = 2 pairing functional f(tau) = integral of w (mu - M), together
/// with the closed-form right side of its tau derivative (for cross checks).
struct CriticalTrace {
    std::vector<double> tau;
    std::vector<double> f;
    std::vector<double> f_prime_formula;
};

CriticalTrace critical_functional(const RescaledState& state,
                                  const SelfSimilarProfile& profile);

/// Scaled deviations from the self-similar pair at selected times:
///   D1 = t^{alpha(1-1/p)}      ||m - M_ss||_p
///   D2 = t^{2-alpha(1+1/p)}    ||m |u_x - U_ss_x|^2||_p
///   D3 = t^{2-alpha(1+1/p)}    ||m |u_t - U_ss_t|||_p
/// with u_t reconstructed from the value equation, u_t = u_x^2/2 - m^theta.
struct MetricsRow {
    double t = 0.0, D1 = 0.0, D2 = 0.0, D3 = 0.0;
};

std::vector<MetricsRow> convergence_metrics(const Field& m, const Field& u,
                                            const SelfSimilarProfile& profile,
                                            double p,
                                            std::span<const double> t_samples);

struct ExpRateFit {
    double k_fit = 0.0;
    double r_squared = 0.0;
};

/// Least-squares slope of log E over [tau_lo, tau_hi]; reports -slope/2, the
/// decay constant of E ~ e^{-2 k tau}. Requires E > 0 on the window.
ExpRateFit fit_exponential_rate(const LyapunovTrace& trace, double tau_lo,
                                double tau_hi);

} // namespace mfg
