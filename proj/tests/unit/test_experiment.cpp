#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "sublab/error.hpp"
#include "sublab/experiment.hpp"
#include "sublab/io.hpp"

using namespace sublab;
using nlohmann::json;

namespace {

const std::filesystem::path kConfigs =
    std::filesystem::path(SUBLAB_SOURCE_DIR) / "configs";

ExperimentConfig smoke() { return load_config(kConfigs / "euclidean-smoke.json"); }

std::string smoke_text() { return read_text(kConfigs / "euclidean-smoke.json"); }

RunOptions quiet() {
  RunOptions opt;
  opt.write_artifacts = false;
  return opt;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("configs round trip through their canonical form") {
  for (const char* name : {"euclidean-smoke.json", "grushin-box.json",
                           "paper-model.json", "grushin-refine-256.json"}) {
    const auto config = load_config(kConfigs / name);
    const auto again = parse_config(serialize_config(config));
    CHECK(again == config);
    CHECK(serialize_config(again) == serialize_config(config));
  }
}

TEST_CASE("unknown keys are rejected with their path") {
  auto j = json::parse(smoke_text());
  j["solver"]["bogus"] = 1;
  const auto message = error_of(j.dump());
  CHECK(message.find("solver.bogus") != std::string::npos);
}

TEST_CASE("out of range parameters name the offending field") {
  auto j = json::parse(smoke_text());
  j["parameters"]["nu"] = 1.0;
  CHECK(error_of(j.dump()).find("parameters.nu") != std::string::npos);
  j = json::parse(smoke_text());
  j["grid"]["nx"] = 2;
  CHECK(error_of(j.dump()).find("grid.nx") != std::string::npos);
  j = json::parse(smoke_text());
  j["centers"][1]["id"] = "origin";
  CHECK(!error_of(j.dump()).empty());
  j = json::parse(smoke_text());
  j["profile"]["kind"] = "cubic";
  CHECK(error_of(j.dump()).find("profile.kind") != std::string::npos);
  CHECK(!error_of("[1, 2]").empty());
  CHECK(!error_of("{not json").empty());
}

TEST_CASE("stages round trip through their names") {
  for (auto stage : {Stage::dist, Stage::balls, Stage::cutoff, Stage::solve,
                     Stage::diagnose, Stage::run}) {
    CHECK(stage_from_string(to_string(stage)) == stage);
  }
  CHECK_THROWS_AS(stage_from_string("plot"), ConfigError);
}

TEST_CASE("the smoke configuration passes every required flag") {
  const auto out = run_experiment(smoke(), quiet());
  CHECK(out.exit_code == exit_code::ok);
  CHECK(out.failed_required.empty());
  const auto report = json::parse(out.report);
  CHECK(report["format"] == kReportFormat);
  CHECK(report["schema_version"] == kReportSchemaVersion);
  CHECK(report["constants"].size() > 0);
  CHECK(out.flags.at("exact_solution"));
}

TEST_CASE("reports are identical across reruns and thread counts") {
  const auto config = smoke();
  const auto a = run_experiment(config, quiet());
  const auto b = run_experiment(config, quiet());
  auto threaded = quiet();
  threaded.threads = 2;
  const auto c = run_experiment(config, threaded);
  CHECK(a.report == b.report);
  CHECK(a.report == c.report);
}

TEST_CASE("errors map to exit codes") {
  auto bad = smoke();
  bad.parameters.nu = 1.5;
  CHECK(run_experiment(bad, quiet()).exit_code == exit_code::config);

  auto tiny = smoke();
  tiny.chain.R = 0.01;
  CHECK(run_experiment(tiny, quiet()).exit_code == exit_code::geometry);

  auto stiff = smoke();
  stiff.solver.boundary.amplitude = 0.5;
  stiff.solver.modulation = Modulation::two_plus_tanh();
  stiff.solver.fixed_point.max_iterations = 1;
  stiff.solver.fixed_point.tolerance = 1e-15;
  stiff.required.clear();
  CHECK(run_experiment(stiff, quiet()).exit_code == exit_code::convergence);

  auto missing = smoke();
  missing.required = {"no_such_flag"};
  const auto out = run_experiment(missing, quiet());
  CHECK(out.exit_code == exit_code::required_flag);
  REQUIRE(out.failed_required.size() == 1);
  CHECK(out.failed_required[0] == "no_such_flag");
}

TEST_CASE("early stages stop before solving") {
  auto opt = quiet();
  opt.stage = Stage::balls;
  const auto out = run_experiment(smoke(), opt);
  CHECK(out.exit_code == exit_code::ok);
  CHECK(out.flags.count("solver_converged") == 0);
  CHECK(out.flags.count("volume_bounds") == 1);
}

TEST_CASE("comparing a report with itself finds no drift") {
  const auto out = run_experiment(smoke(), quiet());
  const auto cmp = compare_reports(out.report, out.report);
  CHECK(cmp.empty_diff());
  CHECK(cmp.flagged == 0);
  CHECK(!cmp.rows.empty());
  CHECK(cmp.table().find("drift") != std::string::npos);
}

TEST_CASE("drift beyond the budget is flagged") {
  const auto out = run_experiment(smoke(), quiet());
  auto j = json::parse(out.report);
  auto& constants = j["constants"];
  REQUIRE(constants.is_object());
  const auto name = constants.begin().key();
  const double v = constants.begin().value().get<double>();
  constants[name] = v * 2.0 + 1.0;
  const auto cmp = compare_reports(out.report, j.dump());
  CHECK(cmp.flagged == 1);
  const auto family = name.substr(0, name.find('/'));
  const auto loose = compare_reports(out.report, j.dump(), {{family, 1.0}});
  CHECK(loose.flagged == 0);
}

TEST_CASE("incomparable reports are rejected") {
  const auto out = run_experiment(smoke(), quiet());
  CHECK_THROWS_AS(compare_reports(out.report, "{}"), SchemaMismatch);
  CHECK_THROWS_AS(compare_reports("not json", out.report), SchemaMismatch);
  auto j = json::parse(out.report);
  j["schema_version"] = kReportSchemaVersion + 1;
  CHECK_THROWS_AS(compare_reports(out.report, j.dump()), SchemaMismatch);
}

TEST_CASE("thread count honours the environment") {
  ::unsetenv("SUBUNIT_LAB_THREADS");
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) == 1);
  ::setenv("SUBUNIT_LAB_THREADS", "2", 1);
  CHECK(resolve_threads(5) == 2);
  ::setenv("SUBUNIT_LAB_THREADS", "many", 1);
  CHECK_THROWS_AS(resolve_threads(1), ConfigError);
  ::unsetenv("SUBUNIT_LAB_THREADS");
}

}  // TEST_SUITE
