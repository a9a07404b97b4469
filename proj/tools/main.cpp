#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mmv/cli.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonArgs& args, bool config_required) {
    auto* opt = sub->add_option("--config", args.config_path, "path to the JSON run configuration");
    if (config_required) opt->required();
    sub->add_option("--out", args.out_dir, "output directory (overrides config and MMV_OUTPUT_DIR)");
    sub->add_option("--seed", args.seed, "master seed override");
}

mmv::RunConfig load_config(const CommonArgs& args) {
    mmv::RunConfig cfg = mmv::RunConfig::from_file(args.config_path);
    if (const char* env = std::getenv("MMV_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    if (args.seed) cfg.mc.seed = *args.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monotone mean-variance portfolio game solver"};
    app.require_subcommand(1);

    CommonArgs solve_args, oracle_args, verify_args, simulate_args, compare_args, example_args;

    auto* solve = app.add_subcommand("solve", "solve the value surface and export it");
    add_common(solve, solve_args, true);
    auto* oracle = app.add_subcommand("oracle", "cross-check the surface against the Monte Carlo oracle");
    add_common(oracle, oracle_args, true);
    auto* verify = app.add_subcommand("verify", "certify the saddle-point conditions on a state grid");
    add_common(verify, verify_args, true);
    auto* simulate = app.add_subcommand("simulate", "simulate the controlled system and certify by sampling");
    add_common(simulate, simulate_args, true);
    auto* compare = app.add_subcommand("compare-mv", "compare the monotone and mean-variance strategies");
    add_common(compare, compare_args, true);
    auto* example = app.add_subcommand("example-bs", "run the constant-coefficient reference pipeline");
    add_common(example, example_args, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return mmv::cli::run_solve(load_config(solve_args), std::cout);
        if (oracle->parsed()) return mmv::cli::run_oracle(load_config(oracle_args), std::cout);
        if (verify->parsed()) return mmv::cli::run_verify(load_config(verify_args), std::cout);
        if (simulate->parsed()) return mmv::cli::run_simulate(load_config(simulate_args), std::cout);
        if (compare->parsed()) return mmv::cli::run_compare_mv(load_config(compare_args), std::cout);
        if (example->parsed()) {
            std::string out = "out";
            if (const char* env = std::getenv("MMV_OUTPUT_DIR"); env && *env) out = env;
            if (!example_args.out_dir.empty()) out = example_args.out_dir;
            const std::uint64_t seed = example_args.seed.value_or(0x5eed0001u);
            return mmv::cli::run_example_bs(out, seed, std::cout);
        }
    } catch (const mmv::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return mmv::cli::kExitConfigError;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return mmv::cli::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return mmv::cli::kExitChecksFailed;
    }
    return mmv::cli::kExitConfigError;
}
