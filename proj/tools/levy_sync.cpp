// levy-sync: run, validate and inspect synchronization experiments.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "levysync/levysync.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo experiments for synchronization of coupled systems under alpha-stable noise"};
    app.require_subcommand(1);
    app.set_version_flag("--version", levysync::kVersion);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    bool no_plots = false;

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the master seed");
    run->add_option("--output", output, "Override the output directory");
    run->add_flag("--no-plots", no_plots, "Skip SVG plots");

    auto* check = app.add_subcommand("validate", "Parse and validate a config file without running it");
    check->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

    app.add_subcommand("list-drifts", "List the built-in drift library");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? levysync::kExitOk : levysync::kExitError;
    }

    if (app.got_subcommand("list-drifts")) {
        for (const auto& d : levysync::drift_catalog()) {
            std::cout << d.name << "\t" << d.formula << "\tdefaults:";
            for (const auto& [k, v] : d.defaults) std::cout << ' ' << k << '=' << v;
            std::cout << '\n';
        }
        return levysync::kExitOk;
    }

    levysync::RunConfig config;
    try {
        config = levysync::parse_config(read_file(config_path));
        if (seed) config.mc.master_seed = *seed;
        if (output) config.output_dir = *output;
        if (no_plots) config.emit_plots = false;
        levysync::validate(config);
    } catch (const levysync::ParseError& e) {
        std::cerr << config_path << ": parse error: " << e.what() << '\n';
        return levysync::kExitError;
    } catch (const levysync::ValidationError& e) {
        std::cerr << config_path << ": validation error: " << e.what() << '\n';
        return levysync::kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return levysync::kExitError;
    }

    if (app.got_subcommand("validate")) {
        std::cout << config_path << ": ok (" << config.experiment << ")\n";
        return levysync::kExitOk;
    }
    return levysync::run(config, std::cerr);
}
