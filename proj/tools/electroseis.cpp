#include <CLI11.hpp>

#include <iostream>

#include "electroseis/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"electroseis: forward solvers, probes and inversion for the electroseismic model"};
    app.require_subcommand(1, 1);

    std::string config, out;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"check-params", "admissibility and pseudoconvexity report"},
        {"forward", "EM then Biot runs, snapshots out"},
        {"oracle", "Galerkin oracle against the finite-difference Biot solver"},
        {"carleman-probe", "Carleman ratio curves over tau"},
        {"reconstruct", "twin-experiment inversion with error report"},
        {"stability-sweep", "Hoelder exponent fit over a perturbation sweep"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", config, "experiment config file")->required();
        sub->add_option("-o,--out", out, "output directory (default: <config stem>_out next to the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : electroseis::exit_validation;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    return electroseis::run_command(cmd, config, out, std::cout, std::cerr);
}
