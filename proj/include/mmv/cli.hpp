#ifndef MMV_CLI_HPP
#define MMV_CLI_HPP

#include <cstdint>
#include <ostream>
#include <string>

#include "mmv/config.hpp"

namespace mmv::cli {

// Exit-code contract shared by every subcommand:
//   0 = all checks pass, 1 = checks ran and failed, 2 = configuration/IO error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitChecksFailed = 1;
inline constexpr int kExitConfigError = 2;

int run_solve(const RunConfig& cfg, std::ostream& log);
int run_oracle(const RunConfig& cfg, std::ostream& log);
int run_verify(const RunConfig& cfg, std::ostream& log);
int run_simulate(const RunConfig& cfg, std::ostream& log);
int run_compare_mv(const RunConfig& cfg, std::ostream& log);

/// Full constant-coefficient pipeline with |lambda| = 0.4, sigma = 0.2, T = 1:
/// solves the surface, checks the closed-form value and strategy numbers, the
/// R_T moments, and the risk-aversion match theta = 1/(4 y0).
int run_example_bs(const std::string& output_dir, std::uint64_t seed, std::ostream& log);

/// Built-in configuration used by run_example_bs, exposed for tests.
RunConfig example_bs_config(const std::string& output_dir, std::uint64_t seed);

}  // namespace mmv::cli

#endif  // MMV_CLI_HPP
