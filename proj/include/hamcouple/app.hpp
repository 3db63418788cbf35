#pragma once

// Experiment orchestration behind the command-line tool: runs one subcommand
// on a loaded configuration and writes results.json plus CSV tables.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hamcouple/config.hpp"

namespace hamcouple {

inline constexpr const char* kToolName = "hamcouple";
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitIntegration = 3, kExitNoSolutions = 4 };

/// A solve step converged nowhere.
class NoSolutions : public Error {
 public:
  using Error::Error;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: $HAMCOUPLE_OUT, else "hamcouple-out"
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool dump_trajectories = false;
};

const std::vector<std::string>& subcommands();

/// Output directory after the environment override.
std::filesystem::path resolve_out_dir(const std::filesystem::path& requested);

/// Throws; see run_config for the exit-code mapping.
void run_experiment(const std::string& subcommand, ExperimentConfig cfg, const RunOptions& opts, std::ostream& log);

/// Loads the config and runs, mapping failures to exit codes: config 2,
/// integration 3, no solutions 4, anything else 1.
int run_config(const std::string& subcommand, const std::filesystem::path& config, const RunOptions& opts,
               std::ostream& log, std::ostream& err);

}  // namespace hamcouple
