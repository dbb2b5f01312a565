#include "mfglab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mfglab/diagnostics.hpp"
#include "mfglab/io.hpp"
#include "mfglab/kernels.hpp"
#include "mfglab/quadrature.hpp"
#include "mfglab/rescaling.hpp"

namespace mfg {

namespace {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config ---

struct KeyBinding {
    enum Type { Double, Int, Bool, String } type;
    void* ptr;
};

std::map<std::string, KeyBinding> bindings(ExperimentConfig& c) {
    return {
        {"variant", {KeyBinding::String, &c.variant}},
        {"theta", {KeyBinding::Double, &c.theta}},
        {"mass", {KeyBinding::Double, &c.mass}},
        {"horizon", {KeyBinding::Double, &c.horizon}},
        {"kappa_T", {KeyBinding::Double, &c.kappa_T}},
        {"t_start", {KeyBinding::Double, &c.t_start}},
        {"nx", {KeyBinding::Int, &c.nx}},
        {"nt", {KeyBinding::Int, &c.nt}},
        {"domain_factor", {KeyBinding::Double, &c.domain_factor}},
        {"cfl", {KeyBinding::Double, &c.cfl}},
        {"tol", {KeyBinding::Double, &c.tol}},
        {"max_iter", {KeyBinding::Int, &c.max_iter}},
        {"solver", {KeyBinding::String, &c.solver}},
        {"exec", {KeyBinding::String, &c.exec}},
        {"init.kind", {KeyBinding::String, &c.init_kind}},
        {"bump.a0", {KeyBinding::Double, &c.bump_a0}},
        {"bump.b0", {KeyBinding::Double, &c.bump_b0}},
        {"planning.terminal", {KeyBinding::String, &c.terminal_kind}},
        {"planning.a1", {KeyBinding::Double, &c.terminal_a1}},
        {"planning.b1", {KeyBinding::Double, &c.terminal_b1}},
        {"rescale.n_eta", {KeyBinding::Int, &c.rescale_n_eta}},
        {"rescale.n_tau", {KeyBinding::Int, &c.rescale_n_tau}},
        {"fit.t_lo", {KeyBinding::Double, &c.fit_t_lo}},
        {"fit.t_hi", {KeyBinding::Double, &c.fit_t_hi}},
        {"metrics.p", {KeyBinding::Double, &c.metrics_p}},
        {"diagnostics.rates", {KeyBinding::Bool, &c.diag_rates}},
        {"diagnostics.lyapunov", {KeyBinding::Bool, &c.diag_lyapunov}},
        {"diagnostics.metrics", {KeyBinding::Bool, &c.diag_metrics}},
        {"diagnostics.conservation", {KeyBinding::Bool, &c.diag_conservation}},
        {"diagnostics.trajectories", {KeyBinding::Bool, &c.diag_trajectories}},
        {"output.dir", {KeyBinding::String, &c.output_dir}},
        {"dump.stride", {KeyBinding::Int, &c.dump_stride}},
        {"dump.full", {KeyBinding::Bool, &c.dump_full}},
        {"sweep.theta", {KeyBinding::String, &c.sweep_theta}},
        {"sweep.mass", {KeyBinding::String, &c.sweep_mass}},
    };
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void assign(const std::string& key, const KeyBinding& b, const std::string& value) {
    try {
        switch (b.type) {
            case KeyBinding::Double:
                *static_cast<double*>(b.ptr) = std::stod(value);
                break;
            case KeyBinding::Int:
                *static_cast<int*>(b.ptr) = std::stoi(value);
                break;
            case KeyBinding::Bool: {
                if (value == "true" || value == "1")
                    *static_cast<bool*>(b.ptr) = true;
                else if (value == "false" || value == "0")
                    *static_cast<bool*>(b.ptr) = false;
                else
                    throw std::invalid_argument("boolean");
                break;
            }
            case KeyBinding::String:
                *static_cast<std::string*>(b.ptr) = value;
                break;
        }
    } catch (const std::exception&) {
        throw ConfigError("config: bad value for key '" + key + "': " + value);
    }
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    auto table = bindings(cfg);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
        assign(key, it->second, value);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    auto table = bindings(copy);
    std::ostringstream out;
    for (const auto& [key, b] : table) {
        out << key << " = ";
        switch (b.type) {
            case KeyBinding::Double: out << format_double(*static_cast<double*>(b.ptr)); break;
            case KeyBinding::Int: out << *static_cast<int*>(b.ptr); break;
            case KeyBinding::Bool: out << (*static_cast<bool*>(b.ptr) ? "true" : "false"); break;
            case KeyBinding::String: out << *static_cast<std::string*>(b.ptr); break;
        }
        out << '\n';
    }
    return out.str();
}

// ------------------------------------------------------------ preparation ---

namespace {

kernels::Exec exec_of(const std::string& s) {
    if (s == "parallel") return kernels::Exec::Parallel;
    if (s == "serial") return kernels::Exec::Serial;
    throw ConfigError("config: exec must be 'parallel' or 'serial'");
}

SolveOptions options_of(const ExperimentConfig& cfg) {
    SolveOptions opt;
    opt.tol = cfg.tol;
    opt.max_iter = cfg.max_iter;
    opt.cfl = cfg.cfl;
    if (cfg.solver == "dual") opt.algorithm = SolveAlgorithm::VariationalDual;
    else if (cfg.solver == "fictitious_play") opt.algorithm = SolveAlgorithm::FictitiousPlay;
    else if (cfg.solver == "picard") opt.algorithm = SolveAlgorithm::Picard;
    else throw ConfigError("config: solver must be dual, fictitious_play or picard");
    opt.exec = exec_of(cfg.exec);
    return opt;
}

int estimate_nt(const ExperimentConfig& cfg, const SelfSimilarProfile& prof,
                double t0, double t1, double dx) {
    // boundary speed of the mass-matched profile at the data time; bump data
    // is matched through its half width
    double t_ref = t0;
    if (cfg.init_kind == "bump") {
        const double half = 0.5 * (cfg.bump_b0 - cfg.bump_a0);
        t_ref = std::pow(half / prof.support_half_width, 1.0 / prof.alpha);
    }
    t_ref = std::max(t_ref, 1e-3);
    const double v_data =
        prof.alpha * prof.support_half_width * std::pow(t_ref, prof.alpha - 1.0);
    const double vmax = 2.0 * v_data + 0.5;
    const int nt = static_cast<int>(std::ceil((t1 - t0) * vmax / (cfg.cfl * dx)));
    return std::max(nt, 64);
}

} // namespace

PreparedRun prepare_run(const ExperimentConfig& cfg) {
    if (!(cfg.theta > 0.0)) throw ConfigError("config: theta must be positive");
    if (!(cfg.mass > 0.0)) throw ConfigError("config: mass must be positive");
    if (!(cfg.horizon > 0.0)) throw ConfigError("config: horizon must be positive");
    if (cfg.nx < 8) throw ConfigError("config: nx must be at least 8");
    if (!(cfg.cfl > 0.0) || cfg.cfl > 0.9)
        throw ConfigError("config: cfl must lie in (0, 0.9]");
    if (!(cfg.domain_factor >= 1.0))
        throw ConfigError("config: domain_factor must be at least 1");

    PreparedRun run;
    run.config = cfg;
    const Variant variant = variant_from_string(cfg.variant);
    const double alpha = alpha_of(cfg.theta);
    run.kappa_resolved = cfg.kappa_T > 0.0 ? cfg.kappa_T : 1.0 / (1.0 - alpha);
    run.params = Params::make(cfg.theta, cfg.mass, cfg.horizon, run.kappa_resolved,
                              variant == Variant::InfiniteHorizon ? Variant::TerminalCost
                                                                  : variant);
    run.profile = SelfSimilarProfile::make(cfg.mass, cfg.theta);

    double t0 = cfg.t_start;
    if (t0 < 0.0) t0 = cfg.init_kind == "self_similar" ? 1.0 : 0.0;
    const double t1 = t0 + cfg.horizon;
    const double x_max = cfg.domain_factor * (1.0 + std::pow(t1, alpha));
    const double dx = 2.0 * x_max / cfg.nx;
    const int nt = cfg.nt > 0 ? cfg.nt : estimate_nt(cfg, run.profile, t0, t1, dx);
    run.grid = Grid::make(-x_max, x_max, cfg.nx, t0, t1, nt);

    if (cfg.init_kind == "self_similar") {
        if (!(t0 > 0.0))
            throw ConfigError("config: t_start must be positive for init.kind = self_similar");
        run.m0.resize(cfg.nx);
        for (int i = 0; i < cfg.nx; ++i)
            run.m0[i] = run.profile.eval(run.grid.x_center(i), t0).m;
    } else if (cfg.init_kind == "bump") {
        run.m0 = make_bump_initial(cfg.bump_a0, cfg.bump_b0, cfg.mass, cfg.theta, run.grid);
    } else {
        throw ConfigError("config: init.kind must be 'self_similar' or 'bump'");
    }

    if (variant == Variant::Planning) {
        if (cfg.terminal_kind == "self_similar") {
            run.mT.resize(cfg.nx);
            for (int i = 0; i < cfg.nx; ++i)
                run.mT[i] = run.profile.eval(run.grid.x_center(i), t1).m;
        } else if (cfg.terminal_kind == "bump") {
            run.mT = make_bump_initial(cfg.terminal_a1, cfg.terminal_b1, cfg.mass,
                                       cfg.theta, run.grid);
        } else {
            throw ConfigError("config: planning.terminal must be 'self_similar' or 'bump'");
        }
        // sampled traces carry O(dx^2) quadrature bias; rescale the target so
        // the discrete compatibility condition holds exactly
        const double dx = run.grid.dx();
        const double mass0 = discrete_mass(run.m0, dx);
        const double massT = discrete_mass(run.mT, dx);
        if (massT > 0.0)
            for (double& v : run.mT) v *= mass0 / massT;
    }
    return run;
}

SolveResult execute_solve(PreparedRun& run, int cfl_retries) {
    const SolveOptions opt = options_of(run.config);
    for (int attempt = 0;; ++attempt) {
        try {
            if (run.params.variant == Variant::Planning)
                return solve_planning(run.m0, run.mT, run.params, run.grid, opt);
            return solve_terminal_cost(run.m0, run.params, run.grid, opt);
        } catch (const CflError&) {
            if (attempt >= cfl_retries) throw;
            run.grid = Grid::make(run.grid.x_min, run.grid.x_max, run.grid.nx,
                                  run.grid.t0, run.grid.t1, 2 * run.grid.nt);
        }
    }
}

// ---------------------------------------------------------------- outputs ---

namespace {

ordered_json grid_json(const Grid& g) {
    return ordered_json{{"x_min", g.x_min}, {"x_max", g.x_max}, {"nx", g.nx},
                        {"t0", g.t0},       {"t1", g.t1},       {"nt", g.nt},
                        {"dx", g.dx()},     {"dt", g.dt()}};
}

ordered_json report_json(const PreparedRun& run, const SolveReport& rep) {
    ordered_json j;
    j["version"] = kVersion;
    j["variant"] = to_string(run.params.variant);
    j["theta"] = run.params.theta;
    j["alpha"] = run.params.alpha;
    j["mass"] = run.params.mass;
    j["kappa_T"] = run.kappa_resolved;
    j["grid"] = grid_json(run.grid);
    j["solve"] = ordered_json{{"iterations", rep.iterations},
                              {"converged", rep.converged},
                              {"residual_history", rep.residual_history}};
    j["config_echo"] = serialize_config(run.config);
    return j;
}

void write_free_boundary_csv(const std::string& path, const FreeBoundary& fb) {
    write_csv(path, {"t", "gamma_L", "gamma_R", "dgamma_L", "dgamma_R"},
              {fb.t_samples, fb.left, fb.right, fb.dleft, fb.dright});
}

struct FitWindow {
    double lo, hi;
};

FitWindow fit_window(const ExperimentConfig& cfg, const Grid& grid) {
    double lo = cfg.fit_t_lo > 0.0 ? cfg.fit_t_lo
                                   : std::max(1.0, grid.t0 + 0.02 * (grid.t1 - grid.t0));
    double hi = cfg.fit_t_hi > 0.0 ? cfg.fit_t_hi : 0.5 * grid.t1;
    lo = std::max(lo, grid.t0 > 0.0 ? grid.t0 : lo);
    hi = std::min(hi, grid.t1);
    if (!(hi > lo)) throw ConfigError("config: empty fit window");
    return {lo, hi};
}

ordered_json ratefit_json(const RateFit& f) {
    return ordered_json{{"quantity", f.quantity},
                        {"exponent_fit", f.exponent_fit},
                        {"exponent_target", f.exponent_target},
                        {"r_squared", f.r_squared},
                        {"t_lo", f.t_lo},
                        {"t_hi", f.t_hi}};
}

struct AsymptoticsSummary {
    bool converged = false;
    double R = 0.0;
    double k_target = std::nan("");
    double k_fit = std::nan("");
    double k_r2 = std::nan("");
    double exp_density = std::nan("");
    double exp_boundary = std::nan("");
    double exp_gradient = std::nan("");
};

AsymptoticsSummary asymptotics_pipeline(const ExperimentConfig& cfg) {
    PreparedRun run = prepare_run(cfg);
    ensure_dir(cfg.output_dir);
    SolveResult sol = execute_solve(run);
    const Grid& grid = run.grid;
    AsymptoticsSummary summary;
    summary.converged = sol.report.converged;
    summary.R = run.profile.R;

    const FreeBoundary fb = extract_free_boundary(sol.m, run.params.theta);
    write_free_boundary_csv(cfg.output_dir + "/free_boundary.csv", fb);

    const FitWindow win = fit_window(cfg, grid);
    ordered_json fits = ordered_json::array();

    // zoomed variables on a box generously covering the rescaled support
    const double eta_max = 2.0 * run.profile.support_half_width;
    std::vector<double> eta(cfg.rescale_n_eta);
    for (int i = 0; i < cfg.rescale_n_eta; ++i)
        eta[i] = -eta_max + 2.0 * eta_max * i / (cfg.rescale_n_eta - 1);
    std::vector<double> tau(cfg.rescale_n_tau);
    const double tau_lo = std::log(win.lo), tau_hi = std::log(win.hi);
    for (int j = 0; j < cfg.rescale_n_tau; ++j)
        tau[j] = tau_lo + (tau_hi - tau_lo) * j / (cfg.rescale_n_tau - 1);

    if (cfg.diag_lyapunov) {
        const RescaledState state = rescale(sol.u, sol.m, run.params, tau, eta);
        const LyapunovTrace trace = lyapunov(state, run.profile);
        std::vector<std::string> header = {"tau", "E", "dE_numeric", "dE_formula"};
        std::vector<std::vector<double>> cols = {trace.tau, trace.E, trace.dE_numeric,
                                                 trace.dE_formula};
        if (!trace.f_critical.empty()) {
            header.push_back("f_critical");
            cols.push_back(trace.f_critical);
        }
        write_csv(cfg.output_dir + "/lyapunov.csv", header, cols);

        if (run.params.theta < 2.0) {
            summary.k_target = run.params.rate_k();
            try {
                const ExpRateFit kf = fit_exponential_rate(trace, tau_lo, tau_hi);
                summary.k_fit = kf.k_fit;
                summary.k_r2 = kf.r_squared;
                fits.push_back(ordered_json{{"quantity", "lyapunov_decay"},
                                            {"k_fit", kf.k_fit},
                                            {"k_target", summary.k_target},
                                            {"r_squared", kf.r_squared}});
            } catch (const std::domain_error& e) {
                fits.push_back(
                    ordered_json{{"quantity", "lyapunov_decay"}, {"error", e.what()}});
            }
        }
    }

    if (cfg.diag_metrics) {
        const std::vector<double> ts = geometric_times(grid, win.lo, win.hi);
        const auto rows = convergence_metrics(sol.m, sol.u, run.profile,
                                              cfg.metrics_p, ts);
        std::vector<double> tcol, d1, d2, d3;
        for (const auto& r : rows) {
            tcol.push_back(r.t);
            d1.push_back(r.D1);
            d2.push_back(r.D2);
            d3.push_back(r.D3);
        }
        write_csv(cfg.output_dir + "/metrics.csv", {"t", "D1", "D2", "D3"},
                  {tcol, d1, d2, d3});
    }

    if (cfg.diag_rates) {
        const SmoothingReport sm = smoothing_check(sol.m, run.params, win.lo, win.hi);
        summary.exp_density = sm.fit.exponent_fit;
        fits.push_back(ratefit_json(sm.fit));
        const FreeBoundaryRates fr = free_boundary_rates(fb, run.params, win.lo, win.hi);
        summary.exp_boundary = fr.position.exponent_fit;
        fits.push_back(ratefit_json(fr.position));
        fits.push_back(ratefit_json(fr.speed));
        fits.push_back(ratefit_json(fr.curvature));
        const GradientRates gr = gradient_rate_check(sol.u, run.params, win.lo, win.hi);
        summary.exp_gradient = gr.space.exponent_fit;
        fits.push_back(ratefit_json(gr.space));
        fits.push_back(ratefit_json(gr.time));
    }

    if (cfg.diag_conservation) {
        const DriftReport drift =
            hamiltonian_conservation(sol.u, sol.m, run.params.theta);
        fits.push_back(ordered_json{{"quantity", "hamiltonian_drift"},
                                    {"max_relative_drift", drift.max_relative_drift}});
    }

    ordered_json j = report_json(run, sol.report);
    j["fit_window"] = ordered_json{{"t_lo", win.lo}, {"t_hi", win.hi}};
    j["rate_fits"] = fits;
    write_text_file(cfg.output_dir + "/ratefits.json", j.dump(2) + "\n");
    return summary;
}

} // namespace

// --------------------------------------------------------------- commands ---

int cmd_profile(double theta, double mass, const std::string& out_dir) {
    try {
        const SelfSimilarProfile prof = SelfSimilarProfile::make(mass, theta);
        ensure_dir(out_dir);
        const int n = 801;
        const double span = 1.2 * prof.support_half_width;
        std::vector<double> eta(n), M(n), U(n), defined(n);
        for (int i = 0; i < n; ++i) {
            eta[i] = -span + 2.0 * span * i / (n - 1);
            M[i] = prof.density_profile(eta[i]);
            const auto u = prof.value_profile(eta[i]);
            defined[i] = u.has_value() ? 1.0 : 0.0;
            U[i] = u.value_or(0.0);
        }
        write_csv(out_dir + "/profile.csv", {"eta", "M", "U", "u_defined"},
                  {eta, M, U, defined});
        ordered_json j;
        j["version"] = kVersion;
        j["theta"] = theta;
        j["mass"] = mass;
        j["alpha"] = alpha_of(theta);
        j["R_a"] = prof.R;
        j["support_half_width"] = prof.support_half_width;
        write_text_file(out_dir + "/profile.json", j.dump(2) + "\n");
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "profile: " << e.what() << "\n";
        return 2;
    }
}

int cmd_solve(const std::string& config_path) {
    try {
        const ExperimentConfig cfg = parse_config_file(config_path);
        PreparedRun run = prepare_run(cfg);
        ensure_dir(cfg.output_dir);
        const SolveResult sol = execute_solve(run);
        const FreeBoundary fb = extract_free_boundary(sol.m, run.params.theta);

        const int stride = cfg.dump_full ? 1 : std::max(cfg.dump_stride, 1);
        write_field_csv(cfg.output_dir + "/m.csv", sol.m, stride);
        write_field_csv(cfg.output_dir + "/u.csv", sol.u, stride);
        write_free_boundary_csv(cfg.output_dir + "/free_boundary.csv", fb);
        write_text_file(cfg.output_dir + "/report.json",
                        report_json(run, sol.report).dump(2) + "\n");
        std::cerr << "solve: " << (sol.report.converged ? "converged" : "NOT converged")
                  << " after " << sol.report.iterations << " iterations ("
                  << sol.report.wall_time_seconds << " s)\n";
        return sol.report.converged ? 0 : 3;
    } catch (const ConfigError& e) {
        std::cerr << "solve: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "solve: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solve: " << e.what() << "\n";
        return 4;
    }
}

int cmd_asymptotics(const std::string& config_path) {
    try {
        const ExperimentConfig cfg = parse_config_file(config_path);
        const AsymptoticsSummary s = asymptotics_pipeline(cfg);
        return s.converged ? 0 : 3;
    } catch (const ConfigError& e) {
        std::cerr << "asymptotics: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "asymptotics: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "asymptotics: " << e.what() << "\n";
        return 4;
    }
}

int sweep_worker_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MFGLAB_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 2;
}

namespace {

std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config: bad entry in " + key + ": " + item);
        }
    }
    return out;
}

} // namespace

int cmd_sweep(const std::string& config_path, int workers) {
    try {
        const ExperimentConfig base = parse_config_file(config_path);
        if (base.sweep_theta.empty() && base.sweep_mass.empty())
            throw ConfigError("sweep: provide sweep.theta and/or sweep.mass ranges");
        std::vector<double> thetas = base.sweep_theta.empty()
                                         ? std::vector<double>{base.theta}
                                         : parse_list(base.sweep_theta, "sweep.theta");
        std::vector<double> masses = base.sweep_mass.empty()
                                         ? std::vector<double>{base.mass}
                                         : parse_list(base.sweep_mass, "sweep.mass");
        if (thetas.empty() || masses.empty())
            throw ConfigError("sweep: empty parameter range");

        struct Point {
            ExperimentConfig cfg;
            AsymptoticsSummary summary;
            bool failed = false;
            std::string error;
        };
        std::vector<Point> points;
        int idx = 0;
        for (double th : thetas)
            for (double ma : masses) {
                Point p;
                p.cfg = base;
                p.cfg.theta = th;
                p.cfg.mass = ma;
                p.cfg.sweep_theta.clear();
                p.cfg.sweep_mass.clear();
                p.cfg.output_dir = base.output_dir + "/point_" + std::to_string(idx++);
                points.push_back(std::move(p));
            }

        ensure_dir(base.output_dir);
        std::mutex queue_mutex;
        std::size_t next = 0;
        auto worker = [&]() {
            for (;;) {
                std::size_t mine;
                {
                    std::lock_guard<std::mutex> lock(queue_mutex);
                    if (next >= points.size()) return;
                    mine = next++;
                }
                try {
                    points[mine].summary = asymptotics_pipeline(points[mine].cfg);
                } catch (const std::exception& e) {
                    points[mine].failed = true;
                    points[mine].error = e.what();
                }
            }
        };
        const int nworkers = std::min<int>(sweep_worker_count(workers),
                                           static_cast<int>(points.size()));
        std::vector<std::thread> pool;
        for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();

        std::vector<double> c_theta, c_alpha, c_mass, c_R, c_ktar, c_kfit, c_expd,
            c_expb, c_expg, c_conv;
        for (const auto& p : points) {
            c_theta.push_back(p.cfg.theta);
            c_alpha.push_back(alpha_of(p.cfg.theta));
            c_mass.push_back(p.cfg.mass);
            c_R.push_back(p.summary.R);
            c_ktar.push_back(p.summary.k_target);
            c_kfit.push_back(p.summary.k_fit);
            c_expd.push_back(p.summary.exp_density);
            c_expb.push_back(p.summary.exp_boundary);
            c_expg.push_back(p.summary.exp_gradient);
            c_conv.push_back(p.failed ? -1.0 : (p.summary.converged ? 1.0 : 0.0));
            if (p.failed)
                std::cerr << "sweep point " << p.cfg.output_dir << " failed: " << p.error
                          << "\n";
        }
        write_csv(base.output_dir + "/aggregate.csv",
                  {"theta", "alpha", "mass", "R", "k_target", "k_fit", "exp_density",
                   "exp_boundary", "exp_gradient", "converged"},
                  {c_theta, c_alpha, c_mass, c_R, c_ktar, c_kfit, c_expd, c_expb,
                   c_expg, c_conv});
        for (const auto& p : points)
            if (p.failed) return 3;
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "sweep: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "sweep: " << e.what() << "\n";
        return 4;
    }
}

int cmd_check() {
    int failures = 0;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n";
        if (!ok) ++failures;
    };

    try {
        // mass invariance of the closed-form pair across times
        {
            std::mt19937 rng(20240811);
            std::uniform_real_distribution<double> logt(std::log(0.1), std::log(100.0));
            double worst = 0.0;
            for (double theta : {0.8, 2.0, 3.5}) {
                const SelfSimilarProfile prof = SelfSimilarProfile::make(1.0, theta);
                for (int k = 0; k < 100; ++k) {
                    const double t = std::exp(logt(rng));
                    const double edge = prof.support_edge(t);
                    const double mass = adaptive_simpson(
                        [&](double x) { return prof.eval(x, t).m; }, -edge, edge, 1e-12);
                    worst = std::max(worst, std::abs(mass - 1.0));
                }
            }
            report("profile mass invariance", worst <= 1e-8,
                   "worst deviation " + format_double(worst));
        }

        // the rescaling of the closed form is its stationary profile
        {
            const SelfSimilarProfile prof = SelfSimilarProfile::make(1.0, 2.0);
            double worst = 0.0;
            for (double t : {0.3, 1.0, 7.0, 64.0})
                for (double eta = -1.5; eta <= 1.5; eta += 0.05) {
                    const double ta = std::pow(t, prof.alpha);
                    const double lhs = ta * prof.eval(ta * eta, t).m;
                    worst = std::max(worst, std::abs(lhs - prof.density_profile(eta)));
                }
            report("rescaling fixed point", worst <= 1e-12,
                   "worst deviation " + format_double(worst));
        }

        // serial and parallel kernels agree exactly
        {
            std::mt19937 rng(7);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            const int nx = 1537;
            std::vector<double> u(nx), f(nx), m(nx), a(nx), b(nx);
            for (int i = 0; i < nx; ++i) {
                u[i] = std::sin(0.01 * i) + 0.2 * unif(rng);
                f[i] = unif(rng);
                m[i] = unif(rng);
            }
            bool same = true;
            kernels::hj_step(u, f, 0.01, 0.001, a, kernels::Exec::Serial);
            kernels::hj_step(u, f, 0.01, 0.001, b, kernels::Exec::Parallel);
            same = same && a == b;
            kernels::transport_step(m, u, 0.01, 0.001, 1e-14, a, kernels::Exec::Serial);
            kernels::transport_step(m, u, 0.01, 0.001, 1e-14, b, kernels::Exec::Parallel);
            same = same && a == b;
            report("kernel serial/parallel agreement", same, "");
        }

        // small terminal-cost solve: conservation and symmetry
        {
            ExperimentConfig cfg;
            cfg.init_kind = "bump";
            cfg.theta = 2.0;
            cfg.horizon = 2.0;
            cfg.nx = 128;
            cfg.tol = 1e-5;
            PreparedRun run = prepare_run(cfg);
            const SolveResult sol = execute_solve(run);
            const double dx = run.grid.dx();
            const double mass0 = discrete_mass(sol.m.level(0), dx);
            double worst_mass = 0.0, worst_sym = 0.0;
            for (int n = 0; n <= run.grid.nt; ++n) {
                worst_mass = std::max(
                    worst_mass,
                    std::abs(discrete_mass(sol.m.level(n), dx) - mass0) / mass0);
                const auto row = sol.m.level(n);
                for (int i = 0; i < run.grid.nx; ++i)
                    worst_sym = std::max(
                        worst_sym, std::abs(row[i] - row[run.grid.nx - 1 - i]));
            }
            report("solver conservation", sol.report.converged && worst_mass <= 1e-12,
                   "mass drift " + format_double(worst_mass));
            report("solver symmetry", worst_sym <= 1e-10,
                   "asymmetry " + format_double(worst_sym));
        }
    } catch (const std::exception& e) {
        report("check suite", false, e.what());
    }

    if (failures > 0) {
        std::cerr << "check: " << failures << " failure(s)\n";
        return 4;
    }
    return 0;
}

} // namespace mfg
