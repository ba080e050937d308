#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <doctest.h>

#include "hdglab/errors.hpp"
#include "hdglab/study.hpp"

using namespace hdglab;

namespace {

std::string temp_dir(const char* tag) {
  const auto dir = std::filesystem::temp_directory_path() / (std::string("hdglab_test_") + tag);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("empty level lists are rejected as invalid-config") {
  StudyConfig config;
  config.levels.clear();
  try {
    config.validate();
    FAIL("expected invalid-config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_config);
  }
}

TEST_CASE("levels must double and degrees must be supported") {
  StudyConfig config;
  config.levels = {2, 4, 6};
  CHECK_THROWS_AS(config.validate(), Error);
  config.levels = {2, 4, 8};
  config.degrees = {5};
  CHECK_THROWS_AS(config.validate(), Error);
  config.degrees = {1};
  config.norms = {"bogus_norm"};
  CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("config files parse with comments and overrides apply") {
  const std::string dir = temp_dir("config");
  const std::string path = dir + "/study.cfg";
  std::ofstream(path) << "# study setup\n"
                         "problem = example1_square\n"
                         "degrees = 1,2\n"
                         "levels = 2,4\n"
                         "tau = 2.5\n"
                         "diagonal = left\n";
  StudyConfig config = parse_config_file(path);
  CHECK(config.problem == Problem::example1_square);
  CHECK(config.degrees == std::vector<int>{1, 2});
  CHECK(config.levels == std::vector<int>{2, 4});
  CHECK(config.tau == doctest::Approx(2.5));
  CHECK(config.diagonal == Diagonal::left);
  apply_override(config, "levels", "4,8,16");
  CHECK(config.levels == std::vector<int>{4, 8, 16});
  try {
    apply_override(config, "nonsense", "1");
    FAIL("expected invalid-config");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_config);
  }
}

TEST_CASE("csv emission round-trips through the reader") {
  StudyConfig config;
  config.problem = Problem::example1_square;
  config.degrees = {1};
  config.levels = {2, 4};
  config.out_dir = temp_dir("csv");
  const StudyResult result = run_study(config);
  REQUIRE(result.ok);
  REQUIRE(result.csv_paths.size() == 1);

  const auto rows = read_csv(result.csv_paths[0]);
  REQUIRE(rows.size() == 3);  // header + 2 levels
  const auto& header = rows[0];
  REQUIRE(header.size() == 2 + 2 * result.reports[0].quantities.size());
  CHECK(header[0] == "n");
  CHECK(header[1] == "h_over_sqrt2");
  CHECK(header[2] == "q_Linf_error");
  CHECK(header[3] == "q_Linf_rate");

  // Every numeric cell reparses and matches the report to print precision.
  const ErrorReport& report = result.reports[0];
  for (std::size_t l = 0; l < report.levels.size(); ++l) {
    const auto& row = rows[l + 1];
    CHECK(std::stoi(row[0]) == report.levels[l].n);
    for (std::size_t q = 0; q < report.quantities.size(); ++q) {
      const double err = std::stod(row[2 + 2 * q]);
      CHECK(err == doctest::Approx(report.levels[l].errors[q]).epsilon(1e-4));
      if (l == 0) {
        CHECK(row[3 + 2 * q] == "-");
      } else {
        const double rate = std::stod(row[3 + 2 * q]);
        const double expect =
            std::log2(report.levels[l - 1].errors[q] / report.levels[l].errors[q]);
        CHECK(rate == doctest::Approx(expect).epsilon(0.01));
      }
    }
  }

  // Byte reproducibility of a re-run.
  const std::string first = slurp(result.csv_paths[0]);
  const StudyResult again = run_study(config);
  CHECK(slurp(again.csv_paths[0]) == first);
}

TEST_CASE("problem quantity sets match the tables") {
  CHECK(problem_quantities(Problem::example1_square) ==
        std::vector<std::string>{"q_Linf", "u_Linf", "ustar_Linf", "q_L2", "u_L2", "q_L2_boundary",
                                 "u_L2_boundary", "ustar_L2_boundary"});
  CHECK(problem_quantities(Problem::example2_control) ==
        std::vector<std::string>{"q_L2", "p_L2", "u_L2", "z_L2", "g_L2_boundary"});
}

TEST_CASE("norm subsetting restricts the CSV columns") {
  StudyConfig config;
  config.problem = Problem::example1_square;
  config.degrees = {1};
  config.levels = {2, 4};
  config.norms = {"u_Linf", "q_L2"};
  config.out_dir = temp_dir("norms");
  const StudyResult result = run_study(config);
  const auto rows = read_csv(result.csv_paths[0]);
  REQUIRE(rows[0].size() == 6);
  CHECK(rows[0][2] == "u_Linf_error");
  CHECK(rows[0][4] == "q_L2_error");
}

TEST_CASE("svg plots are written when requested") {
  StudyConfig config;
  config.problem = Problem::example1_square;
  config.degrees = {1};
  config.levels = {2, 4};
  config.svg = true;
  config.out_dir = temp_dir("svg");
  const StudyResult result = run_study(config);
  const std::string svg = slurp(config.out_dir + "/example1_square_k1.svg");
  CHECK(svg.substr(0, 4) == "<svg");
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("slope 2") != std::string::npos);
}

TEST_CASE("a level failure is recorded in the CSV and flags the run") {
  StudyConfig config;
  config.problem = Problem::example1_lshape;
  config.degrees = {1};
  config.levels = {1, 2, 4};  // n=1 is invalid for the L-shape; later levels still run
  config.out_dir = temp_dir("failure");
  const StudyResult result = run_study(config);
  CHECK_FALSE(result.ok);
  const auto rows = read_csv(result.csv_paths[0]);
  CHECK(rows[1][2] == "FAILED:invalid-parameter");
  CHECK(rows[2][3] == "-");                          // no rate across a failed level
  CHECK(rows[3][3] != "-");                          // 2 -> 4 rate exists
  CHECK(std::stod(rows[3][2]) > 0.0);
}

TEST_CASE("custom manufactured problem runs") {
  StudyConfig config;
  config.problem = Problem::custom_manufactured;
  config.degrees = {1};
  config.levels = {2, 4};
  config.out_dir = temp_dir("custom");
  const StudyResult result = run_study(config);
  CHECK(result.ok);
  CHECK(result.reports[0].levels[1].errors[0] < result.reports[0].levels[0].errors[0]);
}
