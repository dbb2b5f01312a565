#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/lagrangian.hpp"
#include "mfglab/params.hpp"
#include "mfglab/profile.hpp"
#include "mfglab/solver.hpp"

namespace mfg {

/// Raised on malformed configuration; the message names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key=value experiment description. Negative sentinels mean "derive":
/// kappa_T defaults to the compatible value 1/(1-alpha); t_start defaults to
/// 1 for profile-seeded runs and 0 for bump-seeded runs; nt = 0 picks the
/// step count from a velocity estimate under the CFL number.
struct ExperimentConfig {
    std::string variant = "terminal_cost";
    double theta = 2.0;
    double mass = 1.0;
    double horizon = 9.0;
    double kappa_T = -1.0;
    double t_start = -1.0;

    int nx = 1024;
    int nt = 0;
    double domain_factor = 3.0;
    double cfl = 0.45;

    double tol = 1e-6;
    int max_iter = 300;
    std::string solver = "dual";  // dual | fictitious_play | picard
    std::string exec = "parallel";

    std::string init_kind = "self_similar";  // init.kind: self_similar | bump
    double bump_a0 = -1.0;
    double bump_b0 = 1.0;

    std::string terminal_kind = "self_similar";  // planning.terminal
    double terminal_a1 = -1.0;
    double terminal_b1 = 1.0;

    int rescale_n_eta = 801;
    int rescale_n_tau = 161;
    double fit_t_lo = 0.0;  // 0 => auto
    double fit_t_hi = 0.0;  // 0 => auto
    double metrics_p = 1.0;

    bool diag_rates = true;
    bool diag_lyapunov = true;
    bool diag_metrics = true;
    bool diag_conservation = true;
    bool diag_trajectories = false;

    std::string output_dir = "out";
    int dump_stride = 10;
    bool dump_full = false;

    std::string sweep_theta;  // comma-separated values
    std::string sweep_mass;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Config with all derived quantities resolved and data traces built.
struct PreparedRun {
    ExperimentConfig config;
    Params params;
    Grid grid;
    SelfSimilarProfile profile;  // mass matched
    std::vector<double> m0;
    std::vector<double> mT;  // planning only
    double kappa_resolved = 0.0;
};

PreparedRun prepare_run(const ExperimentConfig& cfg);

/// Runs the configured solve; on a CFL violation the step count is doubled
/// (up to `cfl_retries` times) and the run repeated, deterministically.
SolveResult execute_solve(PreparedRun& run, int cfl_retries = 4);

/// Command entry points shared by the CLI; each returns a process exit code:
/// 0 success, 2 configuration error, 3 non-convergence, 4 internal check
/// failure.
int cmd_profile(double theta, double mass, const std::string& out_dir);
int cmd_solve(const std::string& config_path);
int cmd_asymptotics(const std::string& config_path);
int cmd_sweep(const std::string& config_path, int workers);
int cmd_check();

/// Worker count for sweeps: explicit argument, else the MFGLAB_WORKERS
/// environment variable, else 2.
int sweep_worker_count(int requested);

inline constexpr const char* kVersion = "0.1.0";

} // namespace mfg
