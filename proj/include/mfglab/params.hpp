#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

enum class Variant { TerminalCost, Planning, InfiniteHorizon };

/// Scaling exponent of the self-similar regime: alpha = 2/(2+theta).
inline double alpha_of(double theta) { return 2.0 / (2.0 + theta); }

/// Problem parameters for the coupled value/density system
///   -u_t + (1/2) u_x^2 = m^theta,   m_t - (m u_x)_x = 0.
///
/// `alpha` is always recomputed from theta, never stored independently,
/// so the identity alpha*theta == 2 - 2*alpha holds to machine precision.
struct Params {
    double theta;
    double alpha;
    double mass;
    double horizon;   // length of the time window
    double kappa_T;   // terminal-cost scale; the terminal constant is kappa_T * t_end
    Variant variant;

    static Params make(double theta, double mass, double horizon,
                       double kappa_T, Variant variant) {
        if (!(theta > 0.0)) throw std::domain_error("params: theta must be positive");
        if (!(mass > 0.0)) throw std::domain_error("params: mass must be positive");
        if (!(horizon > 0.0)) throw std::domain_error("params: horizon must be positive");
        if (!(kappa_T > 0.0)) throw std::domain_error("params: kappa_T must be positive");
        return Params{theta, alpha_of(theta), mass, horizon, kappa_T, variant};
    }

    /// The functional dichotomy constant k = (2-theta)/(2+theta) = 2*alpha-1.
    double rate_k() const { return (2.0 - theta) / (2.0 + theta); }
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

} // namespace mfg
