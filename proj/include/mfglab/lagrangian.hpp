#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfg {

/// Flow of optimal trajectories: for each source x the curve gamma(x,.) solves
/// gamma' = -u_x(gamma,t) with gamma(x,t0) = x, integrated by the midpoint
/// rule on interpolated velocity data. gamma_x holds the space derivative of
/// the flow, by finite differences across neighboring sources.
struct FlowField {
    std::vector<double> source_points;  // strictly increasing
    std::vector<double> t_samples;      // the grid times
    std::vector<double> gamma;          // ns x (nt+1)
    std::vector<double> gamma_x;        // ns x (nt+1)
    std::vector<std::uint8_t> exited;   // source left the lattice hull (flagged, not fatal)

    int ns() const { return static_cast<int>(source_points.size()); }
    int ntimes() const { return static_cast<int>(t_samples.size()); }
    double g(int s, int n) const { return gamma[static_cast<std::size_t>(s) * ntimes() + n]; }
    double gx(int s, int n) const { return gamma_x[static_cast<std::size_t>(s) * ntimes() + n]; }
};

FlowField integrate_flow(const Field& u, std::span<const double> source_points);

/// Edges of the positivity set {m(.,t) > 0} per time level. Localization
/// scans for the outermost cells with m^theta above the threshold and then
/// extrapolates m^theta linearly to its zero; m^theta is the quantity with
/// linear edge behavior, so the root is well conditioned.
struct FreeBoundary {
    std::vector<double> t_samples;
    std::vector<double> left, right;    // gamma_L(t) < gamma_R(t)
    std::vector<double> dleft, dright;  // centered finite-difference velocities
};

FreeBoundary extract_free_boundary(const Field& m, double theta,
                                   double threshold = 1e-10);

/// Density along the flow, p(x,t) = m(gamma(x,t),t)^theta; ns x (nt+1).
std::vector<double> lagrangian_density(const Field& m, const FlowField& flow,
                                       double theta);

/// Worst sup/inf ratio of the Lagrangian density over intrinsic space-time
/// rectangles whose time extent is stretched by (theta p)^{-1/2} at the
/// center; sampled at a fixed set of interior centers.
struct HarnackReport {
    double worst_ratio = 0.0;
    int rectangles = 0;
};
HarnackReport harnack_ratio(const Field& m, const FlowField& flow, double theta,
                            double alpha);

enum class TrajectoryCase { Constant = 1, Chord = 2, TangentThenBoundary = 3 };

struct ProbeReport {
    double x = 0.0, t = 0.0;
    TrajectoryCase classified = TrajectoryCase::Constant;
    bool confirmed = false;        // integrated characteristic matches the classification
    double linear_residual = 0.0;  // max deviation of the straight segment from its chord
    double tangency_time = 0.0;    // only meaningful for the tangent case
    double u_x_probe = 0.0;
    double speed_bound = 0.0;      // max(|dgamma_L(t)|, |dgamma_R(t)|)
    bool gradient_bound_ok = false;
};

/// Classifies exterior optimal trajectories launched at probes outside the
/// support into the three structural cases (constant; straight chord to the
/// terminal corner of the boundary; straight segment tangent to the boundary,
/// then following it), by integrating the characteristic beta' = -u_x(beta,.)
/// and checking it against the geometry of the extracted boundary. Also
/// checks |u_x(probe)| against the boundary speed bound. A probe inside the
/// support raises a domain error.
std::vector<ProbeReport> check_vanishing_trajectories(
    const Field& u, const FreeBoundary& fb,
    std::span<const std::pair<double, double>> probes);

} // namespace mfg
