#pragma once

#include <string>
#include <vector>

#include "vjscc/config.hpp"

namespace vjscc::cli {

// Exit codes: 0 success, 1 configuration error, 2 runtime/check failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

// Entry point shared by the binary and the tests. args excludes argv[0]:
// {subcommand, --key, value, ...}.
int run(const std::vector<std::string>& args);

// Individual subcommands; config_bytes is the verbatim text copied into the
// output directory.
int cmd_train(ExperimentConfig cfg, const std::string& config_bytes);
int cmd_sweep_snr(ExperimentConfig cfg, const std::string& config_bytes);
int cmd_sweep_cbr(ExperimentConfig cfg, const std::string& config_bytes);
int cmd_visualize_masks(ExperimentConfig cfg, const std::string& config_bytes);
int cmd_gradcheck(ExperimentConfig cfg, const std::string& config_bytes);

std::string usage();

}  // namespace vjscc::cli
