#pragma once

#include <span>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/kernels.hpp"

namespace mfg {

/// Convex-duality formulation of the coupled system. The value/density pair
/// is the saddle point of a Benamou-Brenier-type functional; eliminating the
/// density leaves an unconstrained concave objective over the space-time
/// potential U:
///
///   D(U) = <U(.,t0), m0> - sum over time faces of F*(q(U)) - terminal term,
///   q = -(U^{n+1}-U^n)/dt + (s^n + s^{n+1})/2,
///   s = ((D+ U)^2 + (D- U)^2)/4,
///   F*(q) = theta/(theta+1) q_+^{1+1/theta},
///
/// with terminal term sum of G*(U(.,t1)), G*(v) = theta/(theta+1)
/// c_T^{-1/theta} v_+^{1+1/theta} for the terminal-cost problem, and the
/// linear pairing <U(.,t1), mT> for the planning problem. The density is
/// recovered pointwise as m = q_+^{1/theta} and the gradient of D is the
/// continuity residual of that density, so a maximizer solves the discrete
/// system. Splitting iterations (best response against a frozen density) are
/// kept only as legacy comparison modes; their linearized gain grows like
/// c_T/dx and they diverge at production resolutions.
struct DualProblem {
    Grid grid;      // optimizer lattice; no CFL restriction applies here
    double theta = 2.0;
    std::vector<double> m0;
    double c_T = -1.0;        // > 0 selects the terminal-cost problem
    std::vector<double> mT;   // nonempty selects the planning problem
    // nonempty: U(.,t1) is held at this data instead of carrying a terminal
    // term (used by the planning outer loop on the terminal potential)
    std::vector<double> terminal_dirichlet;
    // Where the density vanishes the objective is flat in U; this curves it
    // by penalizing (q)_-^2, which drives the value equation residual to zero
    // in the void and keeps the iterates from drifting there.
    double void_penalty = 0.0;
};

struct DualResult {
    std::vector<double> U;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_history;  // successive L1 differences of the density iterates
};

/// Preconditioned (time-line and space-line solves) nonlinear conjugate
/// gradient ascent of D, started from U0. Stops when the sup-over-faces L1
/// movement of the density iterate drops below tol.
DualResult maximize_dual(const DualProblem& problem, std::vector<double> U0,
                         int max_iter, double tol,
                         kernels::Exec exec = kernels::Exec::Parallel);

/// Density recovered from the potential at time face `face` (between levels
/// face and face+1).
void dual_face_density(const DualProblem& problem, std::span<const double> U,
                       int face, std::span<double> out);

/// Objective and gradient evaluation (exposed for tests).
double dual_objective(const DualProblem& problem, std::span<const double> U,
                      std::span<double> grad, kernels::Exec exec);

} // namespace mfg
