#pragma once

#include <span>

namespace mfg::kernels {

enum class Exec { Serial, Parallel };

/// One explicit reverse-time step of the monotone Godunov discretization of
///   -u_t + (1/2) u_x^2 = f
/// with homogeneous Neumann walls. `u_in` holds the later time level, `f` the
/// coupling at the lattice points, `u_out` receives the earlier level. The
/// numerical Hamiltonian is
///   H(p-, p+) = (1/2) max(max(p-, 0), -min(p+, 0))^2.
/// Elementwise; results are identical bit for bit across Exec modes.
void hj_step(std::span<const double> u_in, std::span<const double> f,
             double dx, double dt, std::span<double> u_out, Exec exec);

/// One conservative upwind step of m_t - (m u_x)_x = 0. Face velocities are
/// b = -(u_{i+1}-u_i)/dx, zero at the walls, so the discrete mass is exact to
/// rounding; nonnegativity holds under the CFL bound. Values at or below
/// `floor` are set to zero after the update.
void transport_step(std::span<const double> m_in, std::span<const double> u_level,
                    double dx, double dt, double floor, std::span<double> m_out,
                    Exec exec);

/// Largest absolute one-sided gradient of a level; drives the CFL check.
/// Max-reductions are order independent, so both Exec modes agree exactly.
double max_abs_gradient(std::span<const double> u, double dx, Exec exec);

/// m^theta with fast paths for the integer exponents used by the couplings.
double power(double m, double theta);

/// coupling(i) = power(m(i), theta) for a whole level.
void power_level(std::span<const double> m, double theta, std::span<double> out,
                 Exec exec);

} // namespace mfg::kernels
