#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/kernels.hpp"
#include "mfglab/params.hpp"
#include "mfglab/profile.hpp"

namespace mfg {

/// Raised when a time step violates the stability bound. The message names
/// the offending dt and the largest admissible one.
struct CflError : std::runtime_error {
    double dt;
    double dt_max;
    CflError(double dt_, double dt_max_)
        : std::runtime_error("CFL violation: dt = " + std::to_string(dt_) +
                             " exceeds admissible " + std::to_string(dt_max_)),
          dt(dt_), dt_max(dt_max_) {}
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> residual_history;  // successive L1 differences of the density iterates
    bool converged = false;
    double wall_time_seconds = 0.0;        // informational only, never serialized
};

enum class SolveAlgorithm {
    VariationalDual,  // concave dual ascent over the space-time potential (default)
    FictitiousPlay,   // averaged best responses, weights 2/(k+2); legacy comparison
    Picard            // plain best-response iteration; legacy comparison
};

struct SolveOptions {
    // For the dual engine: per-iteration L1 movement of the density iterate
    // at which the ascent is declared stationary. For the legacy modes: the
    // successive-difference threshold of the averaged density.
    double tol = 1e-5;
    int max_iter = 400;
    double cfl = 0.45;              // <= 0.9 required; 0.45 keeps the limited transport positive
    double density_floor = 0.0;     // clamp for sign noise; exact conservation needs 0
    SolveAlgorithm algorithm = SolveAlgorithm::VariationalDual;
    kernels::Exec exec = kernels::Exec::Parallel;
    double dual_dt_factor = 1.0;    // optimizer lattice dt = factor * dx / velocity scale

    // legacy planning outer loop (FictitiousPlay/Picard modes only)
    double planning_step_factor = 0.5;
    int planning_max_outer = 80;
    double planning_inner_tol_factor = 0.5;
};

struct SolveResult {
    Field u;
    Field m;
    SolveReport report;
};

/// Backward sweep of the value equation -u_t + (1/2)u_x^2 = m^theta with the
/// given terminal data: Godunov Hamiltonian on minmod-limited one-sided
/// gradients, explicit Euler in reverse time, homogeneous Neumann walls.
/// Monotone under the CFL bound; a violation raises CflError.
Field hj_backward(const Field& m, std::span<const double> terminal_u,
                  const Params& params, double cfl = 0.45,
                  kernels::Exec exec = kernels::Exec::Parallel);

/// Forward sweep of m_t - (m u_x)_x = 0 from m0: conservative finite-volume
/// upwind fluxes on a limited linear reconstruction, face velocities
/// b = -(u_{i+1}-u_i)/dx, zero at the walls. Discrete mass is constant to
/// rounding; nonnegativity holds under the CFL bound.
Field transport_forward(std::span<const double> m0, const Field& u,
                        double cfl = 0.45, double floor = 1e-14,
                        kernels::Exec exec = kernels::Exec::Parallel);

/// Terminal-cost problem, u(.,t1) = kappa_T t1 m^theta(.,t1). The default
/// engine maximizes the concave dual of the underlying convex space-time
/// functional and then runs one backward value sweep and one conservative
/// transport at the converged coupling, so the returned pair lives on the
/// requested lattice with exactly conserved discrete mass. The legacy
/// best-response iterations are available behind SolveOptions::algorithm;
/// they are kept for comparison and diverge at strong coupling. Residuals
/// are successive L1 differences of the density iterates; running out of
/// iterations reports converged=false rather than throwing.
SolveResult solve_terminal_cost(std::span<const double> m0, const Params& params,
                                const Grid& grid, const SolveOptions& opt = {});

/// Planning problem with both marginals prescribed; same engine with the
/// linear terminal pairing. The returned value function is normalized so its
/// density-weighted mean at the window midpoint vanishes. Mass mismatch
/// between m0 and mT raises a domain error.
SolveResult solve_planning(std::span<const double> m0, std::span<const double> mT,
                           const Params& params, const Grid& grid,
                           const SolveOptions& opt = {});

/// Initial bump with m0^theta(x) = c (x-a0)(b0-x) on (a0,b0), zero outside;
/// c is fixed by quadrature so the continuum mass equals `mass`. The second
/// derivative of m0^theta is the constant -2c, and m0^theta grows linearly
/// from the support endpoints.
std::vector<double> make_bump_initial(double a0, double b0, double mass,
                                      double theta, const Grid& grid);

/// Velocity scale of the run (spreading speed of the mass-matched profile at
/// the data time, with margin); used to budget time steps.
double velocity_scale(std::span<const double> m0, const Params& params,
                      const Grid& grid);

/// Profile pair sampled on the lattice at physical time t_offset + grid.time(n).
Field sample_self_similar_density(const SelfSimilarProfile& p, const Grid& grid,
                                  double t_offset = 0.0);
Field sample_self_similar_value(const SelfSimilarProfile& p, const Grid& grid,
                                double t_offset = 0.0);

} // namespace mfg
