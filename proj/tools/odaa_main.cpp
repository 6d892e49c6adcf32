// odaa: command-line driver for analysis, fitting, solving and validation runs.

#include "odaa/commands.hpp"
#include "odaa/config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Goal-based portfolio allocation by stochastic reachability"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Monte Carlo and fitting seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    for (const char* name : {"analyze", "fit", "solve", "frontier", "simulate", "compare"}) {
        app.add_subcommand(name)->fallthrough();
    }
    app.get_subcommand("analyze")->description("Moments, Jarque-Bera tests and skew/kurtosis regions of the data");
    app.get_subcommand("fit")->description("Fit a Gaussian mixture to moment targets");
    app.get_subcommand("solve")->description("Optimal policy and maximal success probability");
    app.get_subcommand("frontier")->description("Efficient frontier and max-success frontier portfolio");
    app.get_subcommand("simulate")->description("Monte Carlo validation of a policy");
    app.get_subcommand("compare")->description("Compare the optimal policy with the frontier baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(odaa::ExitCode::kInputError);
    }

    odaa::RunConfig cfg;
    try {
        cfg = odaa::load_config(config_path);
    } catch (...) {
        return odaa::exit_code_for_current_exception(std::cerr);
    }
    if (seed) {
        cfg.monte_carlo.seed = *seed;
        cfg.fit.seed = *seed;
    }
    if (out_dir) cfg.output = *out_dir;
    if (threads) cfg.threads = *threads;

    const std::string command = app.get_subcommands().front()->get_name();
    return odaa::run_command(command, cfg, std::cout, std::cerr);
}
