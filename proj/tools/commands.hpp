#pragma once

#include <string>

#include "config.hpp"

namespace rstdr::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitCheckFailed = 4;

std::string version_string();

/// Each command reads its inputs, writes CSV payloads plus a
/// <command>_manifest.json into the output directory and returns an exit code.
int cmd_simulate(const RunConfig& config);
int cmd_bin(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_summarize(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_replicate(const RunConfig& config);
/// Prints one line per check; returns kExitCheckFailed if any fails.
int cmd_check(const RunConfig& config);

}  // namespace rstdr::cli
