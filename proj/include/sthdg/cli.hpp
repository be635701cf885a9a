#pragma once

#include "sthdg/adapt.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sthdg {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExitCode { ok = 0, usage = 2, solver = 3 };

struct RunConfig {
  std::string command = "study";  // solve | study | verify
  std::string problem = "rotating_pulse";
  double epsilon = 1e-3;
  int dim = 2;
  int p_s = 1;
  int cycles = 4;
  StudyMode mode = StudyMode::amr;
  TimeStepPolicy policy = TimeStepPolicy::proportional;
  int n_slabs = 0;  // 0: derived from cells and the policy
  int n_cells = 4;
  std::string out = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  bool timing = false;
  bool vtk = true;
  SolveMode solver = SolveMode::automatic;
  std::size_t max_dofs = 0;
  std::vector<double> slices;  // t values for VTK cuts
  int levels = 3;              // verify: uniform levels
  int samples = 200;           // verify: random samples per element shape

  int effective_slabs() const;
};

// Builds a config from raw string settings keyed by flag name (without dashes).
// Throws UsageError on unknown keys or malformed values.
RunConfig make_config(const std::string& command, const std::map<std::string, std::string>& settings);

// Config-file keys mapped to flag names; unknown keys throw UsageError.
std::map<std::string, std::string> config_file_settings(const std::string& path);

// Parses argv; --help prints usage and returns nullopt-like empty command.
RunConfig parse_command_line(int argc, char** argv, bool* help_shown = nullptr);

// Executes the command and writes its artifacts; returns the exit status.
int run(const RunConfig& cfg);

// argv entry point: parsing, execution and error mapping to exit codes.
int cli_main(int argc, char** argv);

}  // namespace sthdg
