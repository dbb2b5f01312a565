#include "mfglab/profile.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfglab/quadrature.hpp"

namespace mfg {

namespace {

// Integral of (R - c eta^2)_+^{1/theta} over the real line, by adaptive
// Simpson on the support interval. The integrand has a power cusp at the
// endpoints; the adaptive rule concentrates panels there.
double profile_mass(double R, double theta, double c, double tol) {
    if (R <= 0.0) return 0.0;
    const double edge = std::sqrt(R / c);
    const double inv_theta = 1.0 / theta;
    auto f = [&](double eta) {
        const double s = R - c * eta * eta;
        return s > 0.0 ? std::pow(s, inv_theta) : 0.0;
    };
    // even integrand
    return 2.0 * adaptive_simpson(f, 0.0, edge, 0.5 * tol);
}

} // namespace

double compute_R(double mass, double theta) {
    if (!(mass > 0.0)) throw std::domain_error("compute_R: mass must be positive");
    if (!(theta > 0.0)) throw std::domain_error("compute_R: theta must be positive");
    const double alpha = alpha_of(theta);
    const double c = 0.5 * alpha * (1.0 - alpha);
    const double qtol = 1e-13 * mass;

    double lo = std::numeric_limits<double>::epsilon();
    double hi = 1.0;
    while (profile_mass(hi, theta, c, qtol) < mass) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e100) throw std::runtime_error("compute_R: bracket growth failed");
    }
    // the mass integral is strictly increasing in R, so bisection converges
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double val = profile_mass(mid, theta, c, qtol);
        if (std::abs(val - mass) <= 1e-11 * mass) return mid;
        (val < mass ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

SelfSimilarProfile SelfSimilarProfile::make(double mass, double theta) {
    SelfSimilarProfile p;
    p.theta = theta;
    p.alpha = alpha_of(theta);
    p.mass = mass;
    p.R = compute_R(mass, theta);
    p.support_half_width = std::sqrt(2.0 * p.R / (p.alpha * (1.0 - p.alpha)));
    p.z_ref = 0.0;
    return p;
}

double SelfSimilarProfile::density_profile(double eta) const {
    if (std::abs(eta) >= support_half_width) return 0.0;
    const double s = R - 0.5 * alpha * (1.0 - alpha) * eta * eta;
    return s > 0.0 ? std::pow(s, 1.0 / theta) : 0.0;
}

std::optional<double> SelfSimilarProfile::value_profile(double eta) const {
    if (std::abs(eta) > support_half_width) return std::nullopt;
    return -0.5 * alpha * eta * eta;
}

double SelfSimilarProfile::z(double t) const {
    const double p = 2.0 * alpha - 1.0;
    if (theta == 2.0) return z_ref - R * std::log(t);
    return z_ref - R * (std::pow(t, p) - 1.0) / p;
}

SelfSimilarProfile::PointState SelfSimilarProfile::eval(double x, double t) const {
    if (!(t > 0.0)) throw std::domain_error("self-similar eval: t must be positive");
    const double ta = std::pow(t, alpha);
    const double eta = x / ta;
    PointState st;
    st.m = density_profile(eta) / ta;
    st.inside = std::abs(eta) <= support_half_width;
    if (st.inside) {
        st.u = std::pow(t, 2.0 * alpha - 1.0) * (-0.5 * alpha * eta * eta) + z(t);
        st.u_x = -alpha * x / t;
    } else {
        st.u = 0.0;
        st.u_x = 0.0;
    }
    return st;
}

double SelfSimilarProfile::value_time_derivative(double x, double t) const {
    const double eta = x / std::pow(t, alpha);
    return std::pow(t, 2.0 * alpha - 2.0) * (0.5 * alpha * eta * eta - R);
}

double SelfSimilarProfile::support_edge(double t) const {
    return support_half_width * std::pow(t, alpha);
}

SelfSimilarProfile SelfSimilarProfile::with_terminal_constant(double t_end) const {
    SelfSimilarProfile p = *this;
    const double target = R * std::pow(t_end, 2.0 * alpha - 1.0) / (1.0 - alpha);
    p.z_ref = 0.0;
    p.z_ref = target - p.z(t_end);
    return p;
}

} // namespace mfg
