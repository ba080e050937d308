// Convergence-study driver: configure a problem/degree/level sweep, run it,
// and emit one CSV table per (problem, degree) plus optional SVG plots.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hdglab/error_norms.hpp"
#include "hdglab/mesh.hpp"

namespace hdglab {

enum class Problem { example1_square, example1_lshape, example2_control, custom_manufactured };

const char* to_string(Problem p);

struct StudyConfig {
  Problem problem = Problem::example1_square;
  std::vector<int> degrees = {1};
  std::vector<int> levels = {2, 4, 8, 16, 32};
  double tau = 1.0;
  Diagonal diagonal = Diagonal::right;
  double gamma = 1.0;                // control problem only
  std::vector<std::string> norms;    // empty selects all quantities of the problem
  std::string out_dir = ".";
  bool svg = false;

  void validate() const;  // throws invalid-config
};

/// Quantities measured for a problem, in table order.
std::vector<std::string> problem_quantities(Problem p);

/// flat key=value text file; '#' starts a comment.
StudyConfig parse_config_file(const std::string& path);
/// Command-line style override, e.g. key "levels", value "2,4,8".
void apply_override(StudyConfig& config, const std::string& key, const std::string& value);

struct StudyResult {
  std::vector<ErrorReport> reports;  // one per degree in config order
  std::vector<std::string> csv_paths;
  bool ok = true;
};

StudyResult run_study(const StudyConfig& config);

/// CSV layout: n, h_over_sqrt2, then <quantity>_error, <quantity>_rate pairs;
/// errors in scientific notation with 5 significant digits, rates with two
/// decimals, '-' where a rate is undefined.
std::string report_to_csv(const ErrorReport& report);
/// Parse a CSV produced by report_to_csv (header + string cells).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

void write_convergence_svg(const ErrorReport& report, int degree, const std::string& path);

/// Property checks runnable without table data; prints one line per check.
/// Returns the number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace hdglab
