/// @file mfplan.cpp
/// @brief Command-line front end for the mean-field planning solver.
///
///   mfplan run               --config problem.cfg [--out DIR] [--seed N]
///   mfplan convergence-study --config study.cfg [--grids 16x64,32x128,...]
///   mfplan bench             --config problem.cfg [--variants fista,mlfista,mgfista:5]
///
/// See configs/ for annotated examples of the config format.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include "mfp/cli.hpp"
#include "mfp/config.hpp"

namespace {

std::vector<mfp::GridShape> parse_grid_list(const std::string& spec) {
    std::vector<mfp::GridShape> grids;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::vector<int> n;
        std::stringstream gs(item);
        std::string part;
        while (std::getline(gs, part, 'x')) n.push_back(std::stoi(part));
        grids.emplace_back(n);
    }
    return grids;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic mean-field planning / optimal transport solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    unsigned seed = 0;
    int threads = 1;
    std::string grids_spec = "16x64,32x128,64x256,128x512";
    std::string variants_spec = "fista,mlfista,mgfista:5";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides the config)");
        cmd->add_option("--seed", seed, "seed for randomized initialization (init = random)");
        cmd->add_option("--threads", threads,
                        "reserved; the numerical core is single-threaded and deterministic");
    };

    CLI::App* cmd_run = app.add_subcommand("run", "solve one configured problem");
    add_common(cmd_run);
    CLI::App* cmd_study =
        app.add_subcommand("convergence-study", "grid ladder for the 1D reference transport");
    add_common(cmd_study);
    cmd_study->add_option("--grids", grids_spec, "comma-separated ladder, e.g. 16x64,32x128");
    CLI::App* cmd_bench = app.add_subcommand("bench", "compare solver variants on one problem");
    add_common(cmd_bench);
    cmd_bench->add_option("--variants", variants_spec, "e.g. fista,mlfista,mgfista:5");

    CLI11_PARSE(app, argc, argv);

    try {
        const mfp::RunConfig cfg = mfp::parse_config_file(config_path);
        if (cmd_run->parsed()) return mfp::cli::run(cfg, out_dir, seed);
        if (cmd_study->parsed())
            return mfp::cli::convergence_study(cfg, parse_grid_list(grids_spec), out_dir);
        if (cmd_bench->parsed()) {
            std::vector<mfp::cli::BenchVariant> variants;
            std::stringstream ss(variants_spec);
            std::string item;
            while (std::getline(ss, item, ',')) variants.push_back(mfp::cli::parse_variant(item));
            return mfp::cli::bench(cfg, variants, out_dir);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
