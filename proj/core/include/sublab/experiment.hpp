#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sublab/forms.hpp"
#include "sublab/grid.hpp"
#include "sublab/solver.hpp"

namespace sublab {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kReportFormat = "subunit-lab-report";
inline constexpr const char* kVersion = "1.0.0";

struct ProfileConfig {
  ProfileKind kind = ProfileKind::power;
  /// c, k, a or lambda depending on the kind.
  double parameter = 1.0;
  /// Upper end of |x| for paper_model.
  double cap = 0.9;
  bool operator==(const ProfileConfig&) const = default;
};

struct CenterConfig {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const CenterConfig&) const = default;
};

/// Radii R, nu0 R, nu0^2 R, ... (count entries).
struct ChainConfig {
  double R = 0.4;
  int count = 5;
  bool operator==(const ChainConfig&) const = default;
};

struct ParameterConfig {
  double sigma = 2.0;
  double nu = 0.5;
  double nu0 = 0.5;
  double mu = 0.5;
  /// Scale restriction r < eta * dist(center, boundary); reported as a flag.
  double eta = 0.25;
  /// Exponent of the growth condition.
  double lambda = 9.0;
  /// Moser exponent.
  double gamma = 1.0;
  /// Lower shift used when the right-hand side vanishes (0: 1e-6 |u|_inf).
  double m = 0.0;
  int j_max = 12;
  bool operator==(const ParameterConfig&) const = default;
};

/// u = a x + b y + c + amplitude sin(pi kx x) cos(pi ky y) on the boundary.
struct BoundaryConfig {
  double a = 1.0;
  double b = 0.0;
  double c = 2.0;
  double amplitude = 0.0;
  double kx = 1.0;
  double ky = 1.0;
  bool operator==(const BoundaryConfig&) const = default;

  double operator()(double x, double y) const;
  /// True when u = a x + c solves the model equation exactly.
  bool exact_affine() const { return b == 0.0 && amplitude == 0.0; }
};

struct SolverSection {
  /// Constant right-hand side f.
  double rhs = 0.0;
  BoundaryConfig boundary;
  Modulation modulation = Modulation::constant(1.0);
  FixedPointConfig fixed_point;
  LinearSolverConfig linear;
  bool operator==(const SolverSection& o) const {
    return rhs == o.rhs && boundary == o.boundary &&
           modulation == o.modulation &&
           fixed_point.max_iterations == o.fixed_point.max_iterations &&
           fixed_point.damping == o.fixed_point.damping &&
           fixed_point.tolerance == o.fixed_point.tolerance &&
           linear.tolerance == o.linear.tolerance &&
           linear.max_iterations == o.linear.max_iterations;
  }
};

/// Constants calibrated once on reference runs and frozen.
struct CalibrationConfig {
  double C_har = 1.0;
  double C_sigma = 1.0;
  double C_support = 4.0;
  double C_envelope = 4.0;
  double C_special = 4.0;
  bool operator==(const CalibrationConfig&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProfileConfig profile;
  GridSpec grid{-1.0, 1.0, -1.0, 1.0, 129, 129};
  double eps0 = 0.1;
  int rungs = 6;
  std::vector<CenterConfig> centers;
  ChainConfig chain;
  ParameterConfig parameters;
  SolverSection solver;
  CalibrationConfig calibration;
  /// Pass flags whose failure makes run() exit with code 4.
  std::vector<std::string> required;
  /// Relative drift budgets per constant family, used by compare.
  std::map<std::string, double> budgets;
  std::uint64_t seed = 1;

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws ConfigError naming the offending field path.
  void validate() const;
};

/// Parses and validates a JSON config. Unknown keys are rejected; missing
/// optional keys take the defaults above.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field written out.
std::string serialize_config(const ExperimentConfig& config);

enum class Stage { dist, balls, cutoff, solve, diagnose, run };

Stage stage_from_string(const std::string& name);
std::string to_string(Stage stage);

struct RunOptions {
  std::filesystem::path out = "out";
  int threads = 1;
  bool strict = false;
  Stage stage = Stage::run;
  bool write_artifacts = true;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 1;
inline constexpr int geometry = 2;
inline constexpr int convergence = 3;
inline constexpr int required_flag = 4;
}  // namespace exit_code

struct RunOutcome {
  int exit_code = exit_code::ok;
  std::string message;
  /// report.json contents (empty when the run aborted).
  std::string report;
  std::map<std::string, bool> flags;
  std::vector<std::string> failed_required;
};

/// Runs the pipeline up to options.stage and writes the artifact tree under
/// options.out. Errors are mapped to exit codes instead of being thrown.
RunOutcome run_experiment(const ExperimentConfig& config,
                          const RunOptions& options);

struct DriftRow {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double drift = 0.0;
  double budget = 0.0;
  bool flagged = false;
};

struct CompareResult {
  std::vector<DriftRow> rows;
  std::vector<std::string> only_a;
  std::vector<std::string> only_b;
  std::size_t flagged = 0;

  bool empty_diff() const;
  std::string table() const;
};

/// Relative drift |a - b| / max(|a|, |b|) of every shared constant. Budgets
/// are looked up by family (the part of the name before the first '/'):
/// overrides first, then the budgets recorded in report a, then 0.25.
/// Throws SchemaMismatch when the reports are not comparable.
CompareResult compare_reports(const std::string& report_a,
                              const std::string& report_b,
                              const std::map<std::string, double>& budgets = {});

/// Thread count: SUBUNIT_LAB_THREADS when set, else the given value (at
/// least 1).
int resolve_threads(int requested);

}  // namespace sublab
