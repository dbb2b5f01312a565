#pragma once

#include <functional>

namespace mfg {

/// Adaptive composite Simpson rule on [a,b]. Panels are split until the local
/// Richardson estimate meets its share of `tol`; integrands with endpoint
/// cusps (fractional powers vanishing at the support edge) are handled by the
/// recursion concentrating panels there.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth = 48);

} // namespace mfg
