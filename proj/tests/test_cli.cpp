#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "stockdemand/cli.hpp"

using namespace stockdemand;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("stockdemand_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

const char* kScenario = R"({
  "stores": 1, "periods_per_store": 10, "items": 2, "horizon": 4.0,
  "rate": {"kind": "homogeneous", "values_per_store": [[5.0]]},
  "choice": {"kind": "exogenous", "segments": [
    {"preference": [0.65, 0.35], "substitution": 0.5}]},
  "theta": [[1.0]],
  "stock": {"uniform": [1, 10]},
  "seed": 42
})";

const char* kRunConfig = R"({
  "horizon": 4.0,
  "items": ["item1", "item2"],
  "model": {"rate": "homogeneous", "choice": "exogenous", "segments": 1},
  "sampler": {"a": 0.005, "b": 200, "c": 0.6, "iterations": 300, "chains": 2,
              "minibatch": 3, "eta_box": [[0.05, 60.0]]},
  "train_fraction": 0.8,
  "seed": 3
})";

}  // namespace

TEST_CASE("simulate/fit/diagnose/predict/lost-sales workflow") {
  TempDir dir;
  write_file(dir.file("scenario.json"), kScenario);
  write_file(dir.file("run.json"), kRunConfig);

  REQUIRE(run_command({"simulate", "--config", dir.file("scenario.json"), "--out",
                       dir.file("sim")}) == 0);
  REQUIRE(fs::exists(dir.file("sim/transactions.csv")));
  REQUIRE(fs::exists(dir.file("sim/stock.csv")));
  REQUIRE(fs::exists(dir.file("sim/truth.json")));

  REQUIRE(run_command({"fit", "--config", dir.file("run.json"), "--data",
                       dir.file("sim/transactions.csv"), "--stock", dir.file("sim/stock.csv"),
                       "--out", dir.file("fit")}) == 0);
  REQUIRE(fs::exists(dir.file("fit/samples.csv")));
  REQUIRE(fs::exists(dir.file("fit/report.json")));
  {
    std::ifstream rf(dir.file("fit/report.json"));
    json report;
    rf >> report;
    REQUIRE(report.contains("holdout_perplexity"));
    REQUIRE(report.contains("rhat"));
  }

  REQUIRE(run_command({"diagnose", "--samples", dir.file("fit/samples.csv"), "--out",
                       dir.file("diag")}) == 0);
  REQUIRE(fs::exists(dir.file("diag/diagnostics.json")));

  // all-zero stock level: predictions must be identically zero
  REQUIRE(run_command({"predict", "--config", dir.file("run.json"), "--data",
                       dir.file("sim/transactions.csv"), "--stock", dir.file("sim/stock.csv"),
                       "--samples", dir.file("fit/samples.csv"), "--stock-level", "0,0",
                       "--out", dir.file("pred")}) == 0);
  bool saw_summary = false;
  for (const auto& e : fs::directory_iterator(dir.file("pred")))
    if (e.path().string().find("summary") != std::string::npos) saw_summary = true;
  REQUIRE(saw_summary);

  REQUIRE(run_command({"lost-sales", "--config", dir.file("run.json"), "--data",
                       dir.file("sim/transactions.csv"), "--stock", dir.file("sim/stock.csv"),
                       "--samples", dir.file("fit/samples.csv"), "--out",
                       dir.file("lost")}) == 0);
  REQUIRE(fs::exists(dir.file("lost/s1_lost_sales.csv")));

  REQUIRE(run_command({"baseline-fit", "--config", dir.file("run.json"), "--data",
                       dir.file("sim/transactions.csv"), "--stock", dir.file("sim/stock.csv"),
                       "--out", dir.file("base"), "--tau-grid", "0.2", "--tau-grid", "0.5"}) ==
          0);
  {
    std::ifstream bf(dir.file("base/baseline.json"));
    json report;
    bf >> report;
    REQUIRE(report.contains("best_tau"));
    REQUIRE(report["grid"].size() == 2);
  }
}

TEST_CASE("fit derives stock when no stock file is given") {
  TempDir dir;
  write_file(dir.file("scenario.json"), kScenario);
  write_file(dir.file("run.json"), kRunConfig);
  REQUIRE(run_command({"simulate", "--config", dir.file("scenario.json"), "--out",
                       dir.file("sim")}) == 0);
  REQUIRE(run_command({"fit", "--config", dir.file("run.json"), "--data",
                       dir.file("sim/transactions.csv"), "--out", dir.file("fit")}) == 0);
  REQUIRE(fs::exists(dir.file("fit/samples.csv")));
}

TEST_CASE("bad inputs exit nonzero with a category") {
  TempDir dir;
  REQUIRE(run_command({"nope"}) != 0);
  REQUIRE(run_command({"simulate"}) != 0);  // missing --config
  write_file(dir.file("bad.json"), "{ not json");
  REQUIRE(run_command({"simulate", "--config", dir.file("bad.json"), "--out",
                       dir.file("x")}) != 0);
  write_file(dir.file("run.json"), kRunConfig);
  REQUIRE(run_command({"fit", "--config", dir.file("run.json"), "--data",
                       dir.file("missing.csv"), "--out", dir.file("x")}) != 0);
}
