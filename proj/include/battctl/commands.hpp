#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "battctl/config.hpp"

namespace battctl {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitInvalid = 2,
    kExitNoConvergence = 3,
    kExitVerifyFailed = 4,
};

struct CommandOptions {
    std::filesystem::path out_dir = "out";
    bool trajectories = false;                        // include battery trajectories in run JSON
    std::optional<std::filesystem::path> artifacts;   // verify: directory with value_function.json, policy.json
    std::optional<std::filesystem::path> thresholds;  // simulate: replay this thresholds.json
};

// Each command writes only under options.out_dir and prints a short summary
// to out. They return an ExitCode; errors propagate as exceptions.
int cmd_solve(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_simulate(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_sweep(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_pool(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_verify(const RunConfig& config, const CommandOptions& options, std::ostream& out);
int cmd_synth(const RunConfig& config, const CommandOptions& options, std::ostream& out);

}  // namespace battctl
