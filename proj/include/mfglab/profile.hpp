#pragma once

#include <optional>

#include "mfglab/params.hpp"

namespace mfg {

/// Height constant of the stationary density profile
///   M(eta) = (R - alpha(1-alpha)/2 * eta^2)_+^{1/theta},
/// i.e. the unique R > 0 whose profile integrates to `mass`. Computed by
/// bisection on a geometrically grown bracket, with adaptive quadrature of
/// the mass integral; the result is deterministic and satisfies
/// |integral - mass| <= 1e-10 * mass.
double compute_R(double mass, double theta);

/// Closed-form self-similar solution pair. The density is
///   m(x,t) = t^{-alpha} M(x / t^alpha),
/// and inside the support the value function is
///   u(x,t) = t^{2 alpha - 1} U(x / t^alpha) + z(t),  U(eta) = -(alpha/2) eta^2,
/// with z'(t) = -R t^{2 alpha - 2}. The constant of integration is fixed by
/// z(1) = 0; `z_ref` shifts it when a terminal condition pins it instead.
struct SelfSimilarProfile {
    double theta = 0.0;
    double alpha = 0.0;
    double mass = 0.0;
    double R = 0.0;
    double support_half_width = 0.0;
    double z_ref = 0.0;

    static SelfSimilarProfile make(double mass, double theta);

    /// M(eta); zero outside the support.
    double density_profile(double eta) const;

    /// U(eta) = -(alpha/2) eta^2; undefined outside the support.
    std::optional<double> value_profile(double eta) const;

    /// z(t) with z(1) = z_ref.
    double z(double t) const;

    struct PointState {
        double m;     // density, valid everywhere
        double u;     // value, meaningful only when inside
        double u_x;   // space derivative of the value, only when inside
        bool inside;  // |x| <= support_half_width * t^alpha
    };

    /// Self-similar pair at (x, t), t > 0.
    PointState eval(double x, double t) const;

    /// Time derivative of the value function inside the support:
    /// u_t(x,t) = t^{2 alpha - 2} ((alpha/2) eta^2 - R). Independent of z_ref.
    double value_time_derivative(double x, double t) const;

    /// Support edge at time t: x = +- support_half_width * t^alpha.
    double support_edge(double t) const;

    /// Copy of the profile with z_ref chosen so that u(.,t_end) equals
    /// (t_end/(1-alpha)) * m^theta(.,t_end), the compatible terminal condition
    /// at kappa = 1/(1-alpha).
    SelfSimilarProfile with_terminal_constant(double t_end) const;
};

} // namespace mfg
