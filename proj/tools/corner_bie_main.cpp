#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "cornerbie/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Second-kind boundary integral solver for Laplace problems on polygons"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int parallelism = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--parallelism", parallelism, "max concurrent solves (overrides config)");
    };

    CLI::App* conv = app.add_subcommand("convergence", "run a method ladder and emit convergence.csv");
    CLI::App* extr = app.add_subcommand("extrapolate", "run multi-parameter extrapolation levels");
    CLI::App* diag = app.add_subcommand("diagnostics", "run operator-decay diagnostics");
    add_common(conv);
    add_common(extr);
    add_common(diag);

    CLI11_PARSE(app, argc, argv);

    cornerbie::RunConfig cfg;
    try {
        cfg = cornerbie::parse_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (parallelism > 0) cfg.parallelism = parallelism;

    if (conv->parsed()) return cornerbie::cmd_convergence(cfg);
    if (extr->parsed()) return cornerbie::cmd_extrapolate(cfg);
    return cornerbie::cmd_diagnostics(cfg);
}
