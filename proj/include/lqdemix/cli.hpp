#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqdemix/experiments.hpp"
#include "lqdemix/solvers.hpp"

namespace lqdemix::cli {

enum ExitCode : int { kOk = 0, kValidationError = 2, kIoError = 3, kSolverError = 4 };

/// Bad flag, bad config value, or a value outside its legal range.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/*
 * Effective settings of one CLI invocation. Every field has a default and
 * the fully-defaulted config runs the synthetic separation experiment. The
 * `robust-cs` and `inpaint` commands start from their own presets.
 */
struct RunConfig {
  std::string command = "separate";
  SolverId solver = SolverId::bcd;
  SolverConfig solver_cfg;
  SyntheticSpec spec;
  std::vector<Index> k_values;
  std::vector<double> q1_grid;
  std::vector<double> q2_grid;
  std::vector<double> mu_grid;
  std::string robust_mode = "phase";
  double fraction = 0.3;
  std::string input;
  bool joint = true;
  std::string out = "results";
  Index trials = 50;
  Protocol protocol;
  unsigned threads = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Defaults for a command before any config file or flag is applied.
RunConfig defaults_for(const std::string& command);

/*
 * Parses `args` (without the program name). Precedence: flags, then the
 * file given by --config (flat `key = value`, `#` comments), then the
 * command's defaults.
 */
RunConfig parse_config(const std::vector<std::string>& args);

/// Applies `key = value` lines; errors carry the 1-based line number.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source = "config");

/// Applies one setting by key; throws ConfigError on unknown key or bad value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every setting as `key = value` lines, loadable by apply_config_text.
std::string snapshot(const RunConfig& cfg);

/// Base name `<experiment>_<solver>_<seed>` shared by a run's artifacts.
std::string artifact_stem(const RunConfig& cfg);

/// Executes the command; returns the process exit status.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Full entry point: parse then run, mapping failures to exit codes.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lqdemix::cli
