#include <iostream>

#include <CLI11.hpp>

#include "cli_commands.hpp"
#include "seasonal_spline/errors.hpp"

using namespace seasonal_spline;

int main(int argc, char** argv) {
    CLI::App app{"Seasonal-trend decomposition with sparse splines"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    int probe_points = 0;
    std::uint64_t seed = 0;
    for (const char* verb : {"fit", "quadratic", "converge", "simulate"}) {
        auto* sub = app.add_subcommand(verb);
        sub->add_option("--config", config, "Run configuration (JSON)")->required();
        sub->add_option("--out", out, "Output directory (overrides the config)");
        sub->add_option("--probe-points", probe_points, "Points of the dense evaluation grid");
        sub->add_option("--seed", seed, "Noise seed for simulate");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::ConfigError;
    }

    const auto* sub = app.get_subcommands().front();
    cli::Overrides ov;
    if (!out.empty()) ov.out_dir = out;
    if (sub->count("--probe-points")) ov.probe_points = probe_points;
    if (sub->count("--seed")) ov.seed = seed;

    cli::RunConfig cfg;
    try {
        cfg = cli::load_config(config, ov);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::exit_code_for(e);
    }
    return cli::run_command(sub->get_name(), cfg, std::cout, std::cerr);
}
