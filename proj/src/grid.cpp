#include "mfglab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfg {

double Field::interp(double x, double t) const {
    const int nx = grid.nx;
    const int nt = grid.nt;
    const double dx = grid.dx();
    const double dt = grid.dt();

    double s = (t - grid.t0) / dt;
    s = std::clamp(s, 0.0, static_cast<double>(nt));
    int n = std::min(static_cast<int>(s), nt - 1);
    const double wt = s - n;

    double r = (x - grid.x_min) / dx - 0.5;
    r = std::clamp(r, 0.0, static_cast<double>(nx - 1));
    int i = std::min(static_cast<int>(r), nx - 2);
    const double wx = r - i;

    const double a = at(n, i) * (1.0 - wx) + at(n, i + 1) * wx;
    const double b = at(n + 1, i) * (1.0 - wx) + at(n + 1, i + 1) * wx;
    return a * (1.0 - wt) + b * wt;
}

double discrete_mass(std::span<const double> level, double dx) {
    double s = 0.0;
    for (double v : level) s += v;
    return s * dx;
}

double l1_distance(std::span<const double> a, std::span<const double> b, double dx) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s * dx;
}

double lp_norm(std::span<const double> level, double dx, double p) {
    if (std::isinf(p)) return max_abs(level);
    double s = 0.0;
    for (double v : level) s += std::pow(std::abs(v), p);
    return std::pow(s * dx, 1.0 / p);
}

double max_abs(std::span<const double> level) {
    double m = 0.0;
    for (double v : level) m = std::max(m, std::abs(v));
    return m;
}

std::vector<double> space_derivative(std::span<const double> level, double dx) {
    const int n = static_cast<int>(level.size());
    std::vector<double> d(n);
    for (int i = 1; i + 1 < n; ++i) d[i] = (level[i + 1] - level[i - 1]) / (2.0 * dx);
    d[0] = (level[1] - level[0]) / dx;
    d[n - 1] = (level[n - 1] - level[n - 2]) / dx;
    return d;
}

} // namespace mfg
