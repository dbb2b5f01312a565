#include <CLI11.hpp>

#include "mfglab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mfglab: numerical laboratory for a forward-backward "
                 "value/density system with power coupling"};
    app.require_subcommand(1);

    double theta = 2.0, mass = 0.0;
    std::string out_dir = "out";
    auto* profile = app.add_subcommand(
        "profile", "write the closed-form spreading profile and its constants");
    profile->add_option("--theta", theta, "coupling exponent")->required();
    profile->add_option("--mass", mass, "total mass")->required();
    profile->add_option("--out", out_dir, "output directory");

    std::string config_path;
    auto* solve = app.add_subcommand("solve", "run a configured solve and dump fields");
    solve->add_option("config", config_path, "config file")->required();

    auto* asym = app.add_subcommand(
        "asymptotics", "solve, rescale and write decay traces, metrics and rate fits");
    asym->add_option("config", config_path, "config file")->required();

    int workers = 0;
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep of experiments");
    sweep->add_option("config", config_path, "config file with sweep.theta/sweep.mass")
        ->required();
    sweep->add_option("-j,--jobs", workers,
                      "parallel workers (default: MFGLAB_WORKERS or 2)");

    auto* check = app.add_subcommand("check", "run the built-in invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (profile->parsed()) return mfg::cmd_profile(theta, mass, out_dir);
    if (solve->parsed()) return mfg::cmd_solve(config_path);
    if (asym->parsed()) return mfg::cmd_asymptotics(config_path);
    if (sweep->parsed()) return mfg::cmd_sweep(config_path, workers);
    if (check->parsed()) return mfg::cmd_check();
    return 2;
}
