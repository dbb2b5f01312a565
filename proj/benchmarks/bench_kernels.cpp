// Timing comparison of the serial reference kernels against the OpenMP
// variants, across lattice sizes. Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "mfglab/kernels.hpp"

using mfg::kernels::Exec;

namespace {

double time_ms(int repeats, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) body();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 200;
    std::printf("%8s %14s %14s %14s %14s %9s\n", "nx", "hj_serial", "hj_omp",
                "tr_serial", "tr_omp", "speedup");
    for (int nx : {1024, 4096, 16384, 65536, 262144}) {
        std::mt19937 rng(42);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> u(nx), f(nx), m(nx), out(nx);
        for (int i = 0; i < nx; ++i) {
            u[i] = unif(rng);
            f[i] = unif(rng);
            m[i] = unif(rng);
        }
        const double dx = 1.0 / nx, dt = 0.1 * dx;

        const double hj_s = time_ms(repeats, [&] {
            mfg::kernels::hj_step(u, f, dx, dt, out, Exec::Serial);
        });
        const double hj_p = time_ms(repeats, [&] {
            mfg::kernels::hj_step(u, f, dx, dt, out, Exec::Parallel);
        });
        const double tr_s = time_ms(repeats, [&] {
            mfg::kernels::transport_step(m, u, dx, dt, 1e-14, out, Exec::Serial);
        });
        const double tr_p = time_ms(repeats, [&] {
            mfg::kernels::transport_step(m, u, dx, dt, 1e-14, out, Exec::Parallel);
        });
        std::printf("%8d %12.4f ms %12.4f ms %12.4f ms %12.4f ms %8.2fx\n", nx, hj_s,
                    hj_p, tr_s, tr_p, (hj_s + tr_s) / (hj_p + tr_p));
    }
    return 0;
}
