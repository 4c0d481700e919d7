#ifndef AHB_TOOLS_CLI_HPP
#define AHB_TOOLS_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ahb/objective.hpp"
#include "ahb/solvers.hpp"
#include "json.hpp"

namespace ahb::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalFailure = 2, kViolations = 3 };

struct X0Spec {
  enum class Kind { zeros, seeded_random };
  Kind kind = Kind::zeros;
  std::uint64_t seed = 0;
  double norm = 1.0;
};

struct ExperimentConfig {
  ProblemSpec problem;
  bool has_problem = false;
  std::vector<SolverConfig> runs;
  X0Spec x0;
  std::filesystem::path out_dir = "out";
};

// Reads {"problem", "runs", "x0", "out_dir"}. A run may repeat "problem"; it
// must then equal the top-level one.
ExperimentConfig parse_experiment(const nlohmann::json& j);
nlohmann::json to_json(const X0Spec& x0);

Vector make_x0(const X0Spec& spec, Eigen::Index dim);

// The four configurations of the tomography comparison.
std::vector<SolverConfig> default_comparison_runs();

// Entry point; args excludes the program name. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ahb::cli

#endif  // AHB_TOOLS_CLI_HPP
