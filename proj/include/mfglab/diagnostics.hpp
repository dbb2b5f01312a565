#pragma once

#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/lagrangian.hpp"
#include "mfglab/params.hpp"

namespace mfg {

struct RateFit {
    std::string quantity;
    double exponent_fit = 0.0;
    double exponent_target = 0.0;
    double r_squared = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
};

/// Geometrically spaced sample times (ratio 2^{1/4}) snapped to grid levels;
/// every rate fit below runs on these samples.
std::vector<double> geometric_times(const Grid& grid, double t_lo, double t_hi);

/// Log-log fit of ||m(.,t)||_inf against t; target exponent -alpha. Also
/// reports sup over the window of (1+t^alpha) ||m(.,t)||_inf, which stays
/// bounded. The window must span at least one decade.
struct SmoothingReport {
    RateFit fit;
    double sup_scaled_norm = 0.0;
};
SmoothingReport smoothing_check(const Field& m, const Params& params, double t_lo,
                                double t_hi);

/// Rates of the free-boundary trace: position ~ t^alpha, speed ~ t^{alpha-1},
/// curvature ~ t^{alpha-2} with signs (left convex, right concave). Speeds and
/// curvatures come from local quadratic fits through five consecutive
/// geometric samples; the raw trace carries sub-cell localization noise.
/// Planning runs are restricted automatically to the first half window.
struct FreeBoundaryRates {
    RateFit position, speed, curvature;
    bool left_convex = false;
    bool right_concave = false;
    double min_left_curvature = 0.0;
    double max_right_curvature = 0.0;
};
FreeBoundaryRates free_boundary_rates(const FreeBoundary& fb, const Params& params,
                                      double t_lo, double t_hi);

/// Log-log fits of ||u_x(.,t)||_inf (target alpha-1) and of the discrete
/// ||u_t(.,t)||_inf (target 2(alpha-1)).
struct GradientRates {
    RateFit space, time;
};
GradientRates gradient_rate_check(const Field& u, const Params& params, double t_lo,
                                  double t_hi);

/// phi(t) = (p(p-1))^{-1} integral of m^p, which is convex in t along
/// solutions. Discrete curvatures must exceed -tolerance, with the tolerance
/// scaling like dx + dt.
struct ConvexityReport {
    std::vector<double> t, phi;
    double min_curvature = 0.0;
    double tolerance = 0.0;
    bool convex = false;
};
ConvexityReport displacement_convexity_check(const Field& m, double p);

/// I(t0) = space-time integral of ((m^{(theta+eps)/2})_x)^2 over
/// [t0/2, 2t0]; log-log fit against t0 with target -(1 - alpha(1-eps)).
RateFit energy_rate_check(const Field& m, const Params& params, double eps,
                          double t_lo, double t_hi);

/// H(t) = integral of (1/2) m u_x^2 - m^{theta+1}/(theta+1), conserved along
/// solutions; reports max |H(t)-H(t0)| / (|H(t0)|+1).
struct DriftReport {
    std::vector<double> t, H;
    double max_relative_drift = 0.0;
};
DriftReport hamiltonian_conservation(const Field& u, const Field& m, double theta);

} // namespace mfg
