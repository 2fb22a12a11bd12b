// Apache License, Version 2.0, refer to LICENSE.txt

#include "doctest.h"
#include "cli_harness.hpp"
#include "fixtures.hpp"

#include "efdmp/io.hpp"
#include "efdmp/manifest.hpp"

using namespace efdmp;
using namespace efdmp::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSimConfig = config_path("simulation.json").string();

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("simulate, fit and report the small-variance study") {
  const fs::path dir = scratch_dir("cli_pipeline");
  const std::string sim = (dir / "sim").string(), out = (dir / "fit").string(), rep = (dir / "report").string();
  CliResult r = run_cli({"simulate", "--out", sim, "--seed", "4"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "sim" / "data.csv"));
  CHECK(fs::exists(dir / "sim" / "truth.csv"));
  CHECK(fs::exists(dir / "sim" / "manifest.json"));

  const std::string data = (dir / "sim" / "data.csv").string();
  const std::string data_before = slurp(data);
  r = run_cli({"fit", "--config", kSimConfig, "--data", data, "--out", out, "--seed", "1", "--threads", "4"});
  REQUIRE(r.code == 0);
  CHECK(slurp(data) == data_before);
  const json summary = read_json(dir / "fit" / "summary.json");
  CHECK(summary["occupied_clusters"] == 4);
  CHECK(summary["class_frequencies"] == json({25, 25, 25, 25}));
  for (const char* name : {"assignments.csv", "rho.csv", "curves.csv", "elbo.csv", "state.json", "config.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / "fit" / name));
  }
  const json manifest = read_json(dir / "fit" / "manifest.json");
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["inputs"][1]["sha256"] == sha256_file(data));

  r = run_cli({"report", "--fit", out, "--out", rep, "--data", data, "--truth", (dir / "sim" / "truth.csv").string()});
  REQUIRE(r.code == 0);
  const json report = read_json(dir / "report" / "report.json");
  CHECK(report["accuracy"] == 1.0);
  CHECK(report["occupied_clusters"] == 4);
  CHECK(slurp(dir / "report" / "accuracy.csv") == "metric,value\npermutation_accuracy,1\n");
  CHECK(fs::exists(dir / "report" / "contingency.csv"));
}

TEST_CASE("fit is byte-for-byte reproducible") {
  const fs::path dir = scratch_dir("cli_determinism");
  REQUIRE(run_cli({"simulate", "--out", (dir / "sim").string(), "--seed", "9", "--scenario", "high"}).code == 0);
  const std::string data = (dir / "sim" / "data.csv").string();
  const auto fit_into = [&](const std::string& name, const std::string& threads) {
    return run_cli({"fit", "--config", kSimConfig, "--data", data, "--out", (dir / name).string(), "--restarts", "2",
                    "--seed", "7", "--threads", threads})
        .code;
  };
  REQUIRE(fit_into("a", "1") == 0);
  REQUIRE(fit_into("b", "1") == 0);
  REQUIRE(fit_into("c", "2") == 0);
  REQUIRE(fit_into("d", "2") == 0);
  CHECK(first_difference(dir / "a", dir / "b") == "");
  CHECK(first_difference(dir / "c", dir / "d") == "");
  // The thread count is recorded in the manifest; every result file matches.
  CHECK(first_difference(dir / "a", dir / "c", true) == "");
}

TEST_CASE("failures name the stage and path") {
  const fs::path dir = scratch_dir("cli_errors");
  CliResult r = run_cli({"fit", "--config", kSimConfig, "--data", "/no/such/data.csv", "--out", (dir / "x").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("/no/such/data.csv") != std::string::npos);
  CHECK(r.err.find("reading data") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "x"));

  r = run_cli({"fit", "--config", "/no/such/config.json", "--data", "d.csv", "--out", (dir / "x").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("/no/such/config.json") != std::string::npos);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "unit_id,time,value\nu,1,1\nu,oops,2\n";
  }
  r = run_cli({"fit", "--config", kSimConfig, "--data", (dir / "bad.csv").string(), "--out", (dir / "x").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("bad.csv:3") != std::string::npos);

  r = run_cli({"report", "--fit", (dir / "nothing").string(), "--out", (dir / "y").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("config.json") != std::string::npos);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"fit"}).code == 2);
  CHECK(run_cli({"simulate", "--out", "x", "--scenario", "medium"}).code == 2);
  CHECK(run_cli({"fit", "--config", "a", "--data", "b", "--out", "c", "--restarts", "0"}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  const CliResult help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("prior-sample") != std::string::npos);
}

TEST_CASE("prior-sample writes partitions, curves and diagnostics") {
  const fs::path dir = scratch_dir("cli_prior");
  const std::string cfg = config_path("weekly_searches_template.json").string();
  const CliResult r = run_cli({"prior-sample", "--config", cfg, "--out", (dir / "p").string(), "--grid", "1:55:55",
                               "--n", "30", "--draws", "4", "--seed", "3"});
  REQUIRE(r.code == 0);
  const json summary = read_json(dir / "p" / "summary.json");
  CHECK(summary["n"] == 30);
  CHECK(summary["cocluster_probability"].get<double>() > summary["cocluster_limit"].get<double>());
  const std::string partition = slurp(dir / "p" / "partition.csv");
  CHECK(partition.rfind("unit,class,cluster\n", 0) == 0);
  CHECK(std::count(partition.begin(), partition.end(), '\n') == 31);
  const std::string curves = slurp(dir / "p" / "curves_class1.csv");
  CHECK(curves.rfind("time,draw_1,draw_2,draw_3,draw_4\n", 0) == 0);
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 56);
  CHECK(fs::exists(dir / "p" / "prior_mean.csv"));
  CHECK(fs::exists(dir / "p" / "manifest.json"));

  const CliResult again = run_cli({"prior-sample", "--config", cfg, "--out", (dir / "q").string(), "--grid", "1:55:55",
                                   "--n", "30", "--draws", "4", "--seed", "3"});
  REQUIRE(again.code == 0);
  CHECK(first_difference(dir / "p", dir / "q") == "");
  CHECK(run_cli({"prior-sample", "--config", cfg, "--out", (dir / "r").string(), "--grid", "0:60:10"}).code == 1);
}

TEST_CASE("report without truth and a raw fit") {
  const fs::path dir = scratch_dir("cli_raw");
  REQUIRE(run_cli({"simulate", "--out", (dir / "sim").string(), "--seed", "2"}).code == 0);
  const std::string data = (dir / "sim" / "data.csv").string();
  const CliResult r = run_cli({"fit", "--config", kSimConfig, "--data", data, "--out", (dir / "fit").string(),
                               "--restarts", "2", "--raw", "--max-sweeps", "3", "--progress"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("not standardized") != std::string::npos);
  CHECK(r.err.find("restart 1 sweep 1 elbo") != std::string::npos);
  const json summary = read_json(dir / "fit" / "summary.json");
  CHECK_FALSE(summary["warnings"].empty());
  REQUIRE(run_cli({"report", "--fit", (dir / "fit").string(), "--out", (dir / "rep").string()}).code == 0);
  const json report = read_json(dir / "rep" / "report.json");
  CHECK_FALSE(report.contains("accuracy"));
  CHECK(report["units"].size() == 100);
  CHECK_FALSE(fs::exists(dir / "rep" / "contingency.csv"));
}
