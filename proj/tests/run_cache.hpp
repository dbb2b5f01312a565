// Shared small solver runs for the post-processing tests; built once.
#pragma once

#include <cmath>

#include "mfglab/solver.hpp"

namespace cache {

struct TcRun {
    mfg::Params params;
    mfg::Grid grid;
    mfg::SelfSimilarProfile profile;
    mfg::SolveResult sol;
};

// terminal-cost run started on the spreading profile, window [1,6], theta 2
inline const TcRun& small_tc_run() {
    static const TcRun run = [] {
        const auto prof = mfg::SelfSimilarProfile::make(1.0, 2.0);
        const double t0 = 1.0, t1 = 12.0;
        const double x_max = 3.0 * (1.0 + std::pow(t1, 0.5));
        const int nx = 512;
        const double dx = 2.0 * x_max / nx;
        const int nt = static_cast<int>(std::ceil((t1 - t0) * 1.4 / (0.4 * dx)));
        const mfg::Grid grid = mfg::Grid::make(-x_max, x_max, nx, t0, t1, nt);
        std::vector<double> m0(nx);
        for (int i = 0; i < nx; ++i) m0[i] = prof.eval(grid.x_center(i), t0).m;
        const auto params = mfg::Params::make(2.0, 1.0, t1 - t0, 2.0,
                                              mfg::Variant::TerminalCost);
        mfg::SolveOptions opt;
        opt.tol = 1e-5;
        return TcRun{params, grid, prof, mfg::solve_terminal_cost(m0, params, grid, opt)};
    }();
    return run;
}

} // namespace cache
