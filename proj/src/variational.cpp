#include "mfglab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace mfg {

namespace {

struct Workspace {
    int nx, nlev;
    double dx, dt;
    std::size_t idx(int n, int i) const { return static_cast<std::size_t>(n) * nx + i; }
};

// s_i = ((D+ U)^2 + (D- U)^2)/4 with Neumann ghosts
inline double slope_square(std::span<const double> U, const Workspace& w, int n, int i) {
    const double up =
        i + 1 < w.nx ? (U[w.idx(n, i + 1)] - U[w.idx(n, i)]) / w.dx : 0.0;
    const double um = i > 0 ? (U[w.idx(n, i)] - U[w.idx(n, i - 1)]) / w.dx : 0.0;
    return 0.25 * (up * up + um * um);
}

inline double face_q(std::span<const double> U, const Workspace& w, int n, int i) {
    return -(U[w.idx(n + 1, i)] - U[w.idx(n, i)]) / w.dt +
           0.5 * (slope_square(U, w, n, i) + slope_square(U, w, n + 1, i));
}

// tridiagonal (1 + c * second-difference) solve along time lines, one per cell
void time_line_solve(std::vector<double>& v, int nlev, int nx, double c) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nx; ++i) {
        std::vector<double> cp(nlev), dp(nlev);
        double b0 = 1.0 + c;
        cp[0] = -c / b0;
        dp[0] = v[i] / b0;
        for (int n = 1; n < nlev; ++n) {
            const double diag = (n == nlev - 1) ? 1.0 + c : 1.0 + 2.0 * c;
            const double mlt = diag + c * cp[n - 1];
            cp[n] = -c / mlt;
            dp[n] = (v[static_cast<std::size_t>(n) * nx + i] + c * dp[n - 1]) / mlt;
        }
        v[static_cast<std::size_t>(nlev - 1) * nx + i] = dp[nlev - 1];
        for (int n = nlev - 2; n >= 0; --n)
            v[static_cast<std::size_t>(n) * nx + i] =
                dp[n] - cp[n] * v[static_cast<std::size_t>(n + 1) * nx + i];
    }
}

void space_line_solve(std::vector<double>& v, int nlev, int nx, double c) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < nlev; ++n) {
        std::vector<double> cp(nx), dp(nx);
        double* row = &v[static_cast<std::size_t>(n) * nx];
        double b0 = 1.0 + c;
        cp[0] = -c / b0;
        dp[0] = row[0] / b0;
        for (int i = 1; i < nx; ++i) {
            const double diag = (i == nx - 1) ? 1.0 + c : 1.0 + 2.0 * c;
            const double mlt = diag + c * cp[i - 1];
            cp[i] = -c / mlt;
            dp[i] = (row[i] + c * dp[i - 1]) / mlt;
        }
        row[nx - 1] = dp[nx - 1];
        for (int i = nx - 2; i >= 0; --i) row[i] = dp[i] - cp[i] * row[i + 1];
    }
}

} // namespace

void dual_face_density(const DualProblem& p, std::span<const double> U, int face,
                       std::span<double> out) {
    const Workspace w{p.grid.nx, p.grid.nt + 1, p.grid.dx(), p.grid.dt()};
    const double inv_theta = 1.0 / p.theta;
    for (int i = 0; i < w.nx; ++i) {
        const double q = face_q(U, w, face, i);
        out[i] = q > 0.0 ? std::pow(q, inv_theta) : 0.0;
    }
}

double dual_objective(const DualProblem& p, std::span<const double> U,
                      std::span<double> grad, kernels::Exec exec) {
    const Workspace w{p.grid.nx, p.grid.nt + 1, p.grid.dx(), p.grid.dt()};
    const int nx = w.nx;
    const int nfaces = w.nlev - 1;
    const double dx = w.dx, dt = w.dt;
    const double p1 = 1.0 + 1.0 / p.theta;
    const double inv_theta = 1.0 / p.theta;
    std::fill(grad.begin(), grad.end(), 0.0);

    double D = 0.0;
    for (int i = 0; i < nx; ++i) {
        D += U[w.idx(0, i)] * p.m0[i] * dx;
        grad[w.idx(0, i)] += p.m0[i] * dx;
    }

    // per-face partial sums keep the reduction order fixed, so results do not
    // depend on the thread schedule
    std::vector<double> face_sum(nfaces, 0.0);
    const bool par = exec == kernels::Exec::Parallel;
    // faces of equal parity touch disjoint level pairs, so each pass is race free
    for (int parity = 0; parity < 2; ++parity) {
#pragma omp parallel for schedule(static) if (par)
        for (int n = parity; n < nfaces; n += 2) {
            for (int i = 0; i < nx; ++i) {
                const double q = face_q(U, w, n, i);
                double weight;  // d/dq of the face energy
                if (q > 0.0) {
                    weight = std::pow(q, inv_theta);
                    face_sum[n] -= p.theta / (p.theta + 1.0) * std::pow(q, p1) * dx * dt;
                } else if (q < 0.0) {
                    weight = p.void_penalty * q;
                    face_sum[n] -= 0.5 * p.void_penalty * q * q * dx * dt;
                } else {
                    continue;
                }
                const double wgt = weight * dx * dt;
                grad[w.idx(n + 1, i)] += wgt / dt;
                grad[w.idx(n, i)] -= wgt / dt;
                for (int lev = 0; lev < 2; ++lev) {
                    const int nn = n + lev;
                    const double up = i + 1 < nx
                                          ? (U[w.idx(nn, i + 1)] - U[w.idx(nn, i)]) / dx
                                          : 0.0;
                    const double um =
                        i > 0 ? (U[w.idx(nn, i)] - U[w.idx(nn, i - 1)]) / dx : 0.0;
                    const double c = -0.25 * wgt / dx;  // (1/2 face avg)(1/2 slope pair)
                    grad[w.idx(nn, i)] += c * (um - up);
                    if (i + 1 < nx) grad[w.idx(nn, i + 1)] += c * up;
                    if (i > 0) grad[w.idx(nn, i - 1)] -= c * um;
                }
            }
        }
    }
    for (double s : face_sum) D += s;

    const int last = w.nlev - 1;
    if (!p.terminal_dirichlet.empty()) {
        // pinned terminal: no terminal energy, no motion of the last level
        for (int i = 0; i < nx; ++i) grad[w.idx(last, i)] = 0.0;
    } else if (p.c_T > 0.0) {
        const double cfac = std::pow(p.c_T, -inv_theta);
        for (int i = 0; i < nx; ++i) {
            const double v = U[w.idx(last, i)];
            if (v > 0.0) {
                D -= p.theta / (p.theta + 1.0) * cfac * std::pow(v, p1) * dx;
                grad[w.idx(last, i)] -= cfac * std::pow(v, inv_theta) * dx;
            }
        }
    } else {
        for (int i = 0; i < nx; ++i) {
            D -= U[w.idx(last, i)] * p.mT[i] * dx;
            grad[w.idx(last, i)] -= p.mT[i] * dx;
        }
    }
    return D;
}

DualResult maximize_dual(const DualProblem& p, std::vector<double> U0, int max_iter,
                         double tol, kernels::Exec exec) {
    const Workspace w{p.grid.nx, p.grid.nt + 1, p.grid.dx(), p.grid.dt()};
    const std::size_t N = static_cast<std::size_t>(w.nlev) * w.nx;
    if (U0.size() != N) throw std::invalid_argument("maximize_dual: bad U0 size");
    if (p.c_T <= 0.0 && p.mT.empty() && p.terminal_dirichlet.empty())
        throw std::invalid_argument("maximize_dual: no terminal data");

    DualResult res;
    res.U = std::move(U0);
    if (!p.terminal_dirichlet.empty()) {
        const std::size_t off = static_cast<std::size_t>(w.nlev - 1) * w.nx;
        std::copy(p.terminal_dirichlet.begin(), p.terminal_dirichlet.end(),
                  res.U.begin() + off);
    }
    std::vector<double> grad(N), z(N), dir(N), zprev(N), Utry(N), gtry(N);
    std::vector<double> m_prev(static_cast<std::size_t>(w.nlev - 1) * w.nx);
    std::vector<double> m_cur(m_prev.size());

    auto snapshot_density = [&](std::vector<double>& m) {
#pragma omp parallel for schedule(static)
        for (int n = 0; n < w.nlev - 1; ++n)
            dual_face_density(p, res.U, n,
                              std::span<double>(&m[static_cast<std::size_t>(n) * w.nx],
                                                w.nx));
    };
    auto density_gap = [&]() {
        double worst = 0.0;
        for (int n = 0; n < w.nlev - 1; ++n) {
            double l1 = 0.0;
            const std::size_t off = static_cast<std::size_t>(n) * w.nx;
            for (int i = 0; i < w.nx; ++i) l1 += std::abs(m_cur[off + i] - m_prev[off + i]);
            worst = std::max(worst, l1 * w.dx);
        }
        return worst;
    };

    // line preconditioner strengths in grid units; the time direction carries
    // most of the stiffness
    double c_time = 160.0;
    double c_space = 2.0;
    if (const char* e = std::getenv("MFG_PC_T")) c_time = std::atof(e);
    if (const char* e = std::getenv("MFG_PC_X")) c_space = std::atof(e);
    auto precondition = [&](const std::vector<double>& gin, std::vector<double>& out) {
        out = gin;
        time_line_solve(out, w.nlev, w.nx, c_time);
        space_line_solve(out, w.nlev, w.nx, c_space);
        if (!p.terminal_dirichlet.empty()) {
            // line solves smear into the pinned level; keep it immobile
            const std::size_t off = static_cast<std::size_t>(w.nlev - 1) * w.nx;
            std::fill(out.begin() + off, out.end(), 0.0);
        }
    };

    double D = dual_objective(p, res.U, grad, exec);
    precondition(grad, z);
    dir = z;
    zprev = z;
    double den_prev = 0.0;
    for (std::size_t j = 0; j < N; ++j) den_prev += grad[j] * z[j];
    snapshot_density(m_prev);

    // trust scale for step displacements, from the start iterate's spread;
    // it tightens with k so the flat directions (flow-lifted shifts that do
    // not move the density) stop rattling the iterate
    double u_lo = res.U[0], u_hi = res.U[0];
    for (double v : res.U) {
        u_lo = std::min(u_lo, v);
        u_hi = std::max(u_hi, v);
    }
    const double trust0 = 0.5 * (u_hi - u_lo) + 0.5;
    double trust = trust0;
    double peak_gain = 0.0;
    std::vector<double> D_history;

    double step = 1.0;
    for (int k = 1; k <= max_iter; ++k) {
        double gd = 0.0;
        double dir_max = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            gd += grad[j] * dir[j];
            dir_max = std::max(dir_max, std::abs(dir[j]));
        }
        if (gd <= 0.0) {  // restart on a non-ascent direction
            dir = z;
            gd = 0.0;
            dir_max = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                gd += grad[j] * dir[j];
                dir_max = std::max(dir_max, std::abs(dir[j]));
            }
        }
        if (dir_max > 0.0) step = std::min(step, trust / dir_max);

        double Dnew = D;
        int ls = 0;
        for (; ls < 60; ++ls) {
#pragma omp parallel for schedule(static)
            for (long long j = 0; j < static_cast<long long>(N); ++j)
                Utry[j] = res.U[j] + step * dir[j];
            Dnew = dual_objective(p, Utry, gtry, exec);
            if (Dnew >= D + 1e-4 * step * gd) break;
            step *= 0.5;
        }
        if (ls == 60) break;  // ascent exhausted at machine precision

        std::swap(res.U, Utry);
        std::swap(grad, gtry);
        D = Dnew;
        step *= 1.6;

        // shrink the trust region once the ascent stops paying; the remaining
        // motion is along density-neutral directions and only adds noise
        D_history.push_back(D);
        if (D_history.size() > 20) {
            const double gain = D - D_history[D_history.size() - 21];
            peak_gain = std::max(peak_gain, gain);
            // the ascent has gone quiet relative to both the objective scale
            // and its own best rate: clamp down and let the iterate settle
            if (gain <= std::max(2e-7 * (std::abs(D) + 1.0), 0.01 * peak_gain))
                trust *= 0.5;
            else
                trust = std::min(trust * 1.3, trust0);
            if (std::getenv("MFG_DEBUG_DUAL") && k % 20 == 0)
                std::fprintf(stderr, "k=%d D=%.10f gain20=%.3e trust=%.3e step=%.3e\n",
                             k, D, gain, trust, step);
        }
        if (k % 30 == 0) {  // periodic restart sheds accumulated drift
            precondition(grad, z);
            dir = z;
            zprev = z;
            den_prev = 0.0;
            for (std::size_t j = 0; j < N; ++j) den_prev += grad[j] * z[j];
            snapshot_density(m_cur);
            const double gap0 = density_gap();
            res.residual_history.push_back(gap0);
            res.iterations = k;
            std::swap(m_prev, m_cur);
            if (gap0 <= tol && k >= 8) {
                res.converged = true;
                break;
            }
            continue;
        }

        zprev = z;
        precondition(grad, z);
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            num += grad[j] * (z[j] - zprev[j]);
            den += grad[j] * z[j];
        }
        const double beta = den_prev != 0.0 ? std::max(0.0, num / den_prev) : 0.0;
        den_prev = den;
        for (std::size_t j = 0; j < N; ++j) dir[j] = z[j] + beta * dir[j];

        snapshot_density(m_cur);
        const double gap = density_gap();
        res.residual_history.push_back(gap);
        res.iterations = k;
        std::swap(m_prev, m_cur);
        if (gap <= tol && k >= 8) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace mfg
