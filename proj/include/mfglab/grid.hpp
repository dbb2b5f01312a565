#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace mfg {

/// Uniform space-time lattice on [x_min,x_max] x [t0,t1]. Space is cell
/// centered (nx cells); time has nt steps, i.e. nt+1 stored levels.
struct Grid {
    double x_min = 0.0, x_max = 0.0;
    int nx = 0;
    double t0 = 0.0, t1 = 0.0;
    int nt = 0;

    static Grid make(double x_min, double x_max, int nx, double t0, double t1, int nt) {
        if (!(x_max > x_min)) throw std::domain_error("grid: x_max must exceed x_min");
        if (nx < 2) throw std::domain_error("grid: nx must be at least 2");
        if (!(t1 > t0) || t0 < 0.0) throw std::domain_error("grid: need 0 <= t0 < t1");
        if (nt < 1) throw std::domain_error("grid: nt must be at least 1");
        return Grid{x_min, x_max, nx, t0, t1, nt};
    }

    double dx() const { return (x_max - x_min) / nx; }
    double dt() const { return (t1 - t0) / nt; }
    double x_center(int i) const { return x_min + (i + 0.5) * dx(); }
    double time(int n) const { return t0 + n * dt(); }

    bool operator==(const Grid&) const = default;
};

enum class FieldKind { Density, Value, Velocity };

/// Scalar field sampled on all grid levels, time-major storage.
struct Field {
    Grid grid;
    FieldKind kind = FieldKind::Value;
    std::vector<double> data;

    Field() = default;
    Field(const Grid& g, FieldKind k)
        : grid(g), kind(k), data(static_cast<std::size_t>(g.nt + 1) * g.nx, 0.0) {}

    double& at(int n, int i) { return data[static_cast<std::size_t>(n) * grid.nx + i]; }
    double at(int n, int i) const { return data[static_cast<std::size_t>(n) * grid.nx + i]; }

    std::span<double> level(int n) {
        return {data.data() + static_cast<std::size_t>(n) * grid.nx,
                static_cast<std::size_t>(grid.nx)};
    }
    std::span<const double> level(int n) const {
        return {data.data() + static_cast<std::size_t>(n) * grid.nx,
                static_cast<std::size_t>(grid.nx)};
    }

    /// Bilinear interpolation in (x,t), clamped to the lattice hull.
    double interp(double x, double t) const;
};

/// dx * sum of a level; the discrete mass when the level is a density.
double discrete_mass(std::span<const double> level, double dx);

/// dx-weighted L1 distance of two levels.
double l1_distance(std::span<const double> a, std::span<const double> b, double dx);

/// L^p norm of a level (dx-weighted); p = infinity gives the max norm.
double lp_norm(std::span<const double> level, double dx, double p);

double max_abs(std::span<const double> level);

/// Centered space derivative of a level (one-sided at the walls).
std::vector<double> space_derivative(std::span<const double> level, double dx);

} // namespace mfg
