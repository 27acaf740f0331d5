#include <doctest.h>

#include "robusttc/commands.hpp"
#include "robusttc/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace robusttc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("cmdtest_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_config(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump(2) << "\n";
}

nlohmann::json tiny_pipeline_config() {
  return {
      {"suite",
       {{"num_clusters", 2},
        {"tasks_per_cluster", 2},
        {"instances_per_label", 15},
        {"ambient_dim", 8},
        {"subspace_dim", 2},
        {"min_labels_per_task", 2},
        {"max_labels_per_task", 2},
        {"num_targets", 1}}},
      {"train", {{"embed_dim", 2}, {"episodes", 50}, {"epochs", 20}}},
      {"k", 2},
      {"seed", 11},
  };
}

CommonOptions with_config(const fs::path& config, const fs::path& out) {
  CommonOptions options;
  options.config_path = config.string();
  options.out_dir = out.string();
  return options;
}

}  // namespace

TEST_CASE("simulate emits a planted matrix triple deterministically") {
  TempDir dir;
  write_config(dir / "config.json",
               {{"mode", "matrix"}, {"n", 12}, {"k", 2}, {"seed", 7},
                {"observe_frac", 0.8}, {"corrupt_frac", 0.1}});

  auto first = dir / "run1";
  cmd_simulate(with_config(dir / "config.json", first));
  for (const char* name : {"X_star.csv", "observed.csv", "ground_truth.csv"})
    CHECK(fs::exists(first / name));

  Matrix x = read_matrix_csv(first / "X_star.csv");
  REQUIRE(x.rows() == 12);
  REQUIRE(x.cols() == 12);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      CHECK((x(i, j) == 0.0 || x(i, j) == 1.0));

  auto observed = read_partial_matrix_csv(first / "observed.csv");
  CHECK(observed.n() == 12);
  CHECK(observed.is_symmetric());

  auto second = dir / "run2";
  cmd_simulate(with_config(dir / "config.json", second));
  for (const char* name : {"X_star.csv", "observed.csv", "ground_truth.csv"})
    CHECK(slurp(first / name) == slurp(second / name));
}

TEST_CASE("simulate emits task suites as JSONL") {
  TempDir dir;
  write_config(dir / "config.json",
               {{"mode", "tasks"},
                {"seed", 5},
                {"suite",
                 {{"num_clusters", 2},
                  {"tasks_per_cluster", 2},
                  {"instances_per_label", 10},
                  {"ambient_dim", 6},
                  {"subspace_dim", 2},
                  {"min_labels_per_task", 2},
                  {"max_labels_per_task", 2},
                  {"num_targets", 1}}}});

  auto first = dir / "run1";
  cmd_simulate(with_config(dir / "config.json", first));
  auto tasks = read_tasks_jsonl(first / "tasks.jsonl");
  auto targets = read_tasks_jsonl(first / "targets.jsonl");
  CHECK(tasks.size() == 4);
  CHECK(targets.size() == 1);
  for (const auto& t : tasks) CHECK(t.dim == 6);

  auto second = dir / "run2";
  cmd_simulate(with_config(dir / "config.json", second));
  for (const char* name : {"tasks.jsonl", "targets.jsonl", "ground_truth.csv"})
    CHECK(slurp(first / name) == slurp(second / name));
}

TEST_CASE("complete reads a matrix and writes solver artifacts") {
  TempDir dir;
  write_config(dir / "sim.json",
               {{"mode", "matrix"}, {"n", 12}, {"k", 2}, {"seed", 3},
                {"observe_frac", 1.0}, {"corrupt_frac", 0.0}});
  auto sim_out = dir / "sim";
  cmd_simulate(with_config(dir / "sim.json", sim_out));

  write_config(dir / "complete.json", {{"input", (sim_out / "observed.csv").string()}});
  auto out = dir / "solve";
  cmd_complete(with_config(dir / "complete.json", out));

  Matrix x = read_matrix_csv(out / "X.csv");
  Matrix x_star = read_matrix_csv(sim_out / "X_star.csv");
  CHECK((x - x_star).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(fs::exists(out / "E.csv"));

  auto diag = nlohmann::json::parse(slurp(out / "diagnostics.json"));
  CHECK(diag.at("converged").get<bool>());
  CHECK(diag.at("iterations").get<int>() >= 1);
}

TEST_CASE("command-line flags override config values") {
  TempDir dir;
  write_config(dir / "sim.json",
               {{"mode", "matrix"}, {"n", 10}, {"k", 2}, {"seed", 9},
                {"observe_frac", 0.9}, {"corrupt_frac", 0.1}});
  auto sim_out = dir / "sim";
  cmd_simulate(with_config(dir / "sim.json", sim_out));
  const auto input = (sim_out / "observed.csv").string();

  write_config(dir / "low.json", {{"input", input}, {"lambda", 0.1}});
  write_config(dir / "high.json", {{"input", input}, {"lambda", 5.0}});

  auto flag_out = dir / "flagged";
  auto flag_options = with_config(dir / "low.json", flag_out);
  flag_options.lambda = 5.0;
  cmd_complete(flag_options);

  auto plain_out = dir / "plain";
  cmd_complete(with_config(dir / "high.json", plain_out));
  CHECK(slurp(flag_out / "X.csv") == slurp(plain_out / "X.csv"));
  CHECK(slurp(flag_out / "E.csv") == slurp(plain_out / "E.csv"));

  auto low_out = dir / "low";
  cmd_complete(with_config(dir / "low.json", low_out));
  CHECK(slurp(low_out / "X.csv") != slurp(flag_out / "X.csv"));
}

TEST_CASE("pipeline runs end to end and reruns byte-identically") {
  TempDir dir;
  write_config(dir / "config.json", tiny_pipeline_config());

  auto first = dir / "run1";
  cmd_pipeline(with_config(dir / "config.json", first));
  for (const char* name :
       {"tasks.jsonl", "targets.jsonl", "ground_truth.csv", "results.csv", "summary.json",
        "encoder_0.json", "encoder_1.json", "alphas_robust_tc_fsl.csv"})
    CHECK(fs::exists(first / name));

  auto text = slurp(first / "results.csv");
  CHECK(text.find("robust_tc_fsl") != std::string::npos);
  CHECK(text.find("adaptive") != std::string::npos);
  CHECK(text.find("single_metric") != std::string::npos);
  CHECK(text.find("single_task") != std::string::npos);

  auto summary = nlohmann::json::parse(slurp(first / "summary.json"));
  REQUIRE(summary.contains("macro_accuracy"));
  for (const char* method : {"robust_tc_fsl", "adaptive", "single_metric", "single_task"}) {
    REQUIRE(summary["macro_accuracy"].contains(method));
    Scalar v = summary["macro_accuracy"][method].get<Scalar>();
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  auto second = dir / "run2";
  cmd_pipeline(with_config(dir / "config.json", second));
  for (const char* name : {"results.csv", "summary.json", "tasks.jsonl"})
    CHECK(slurp(first / name) == slurp(second / name));
}

TEST_CASE("pipeline consumes previously simulated task files") {
  TempDir dir;
  auto sim_config = nlohmann::json{
      {"mode", "tasks"},
      {"seed", 11},
      {"suite", tiny_pipeline_config()["suite"]},
  };
  write_config(dir / "sim.json", sim_config);
  auto sim_out = dir / "sim";
  cmd_simulate(with_config(dir / "sim.json", sim_out));

  write_config(dir / "pipe.json",
               {{"tasks", (sim_out / "tasks.jsonl").string()},
                {"targets", (sim_out / "targets.jsonl").string()},
                {"train", tiny_pipeline_config()["train"]},
                {"k", 2},
                {"seed", 11}});
  auto out = dir / "run";
  cmd_pipeline(with_config(dir / "pipe.json", out));
  CHECK(fs::exists(out / "results.csv"));
  CHECK(fs::exists(out / "summary.json"));
}

TEST_CASE("sweep writes the grid as CSV") {
  TempDir dir;
  write_config(dir / "config.json",
               {{"n", 12}, {"k", 2}, {"observe_grid", {1.0}}, {"corrupt_grid", {0.0}},
                {"trials", 2}, {"seed", 9}});
  auto out = dir / "run";
  cmd_sweep(with_config(dir / "config.json", out));
  auto text = slurp(out / "sweep.csv");
  CHECK(text.find("observe_frac,corrupt_frac,trials,recovery_rate,mean_iterations") !=
        std::string::npos);
  CHECK(text.find("\n1,0,2,1,") != std::string::npos);
}

TEST_CASE("config errors name the offending key or file") {
  TempDir dir;
  write_config(dir / "typo.json", {{"modee", "matrix"}});
  auto out = dir / "run";
  CHECK_THROWS_WITH_AS(cmd_simulate(with_config(dir / "typo.json", out)),
                       doctest::Contains("modee"), std::runtime_error);

  write_config(dir / "missing.json", {{"input", (dir / "absent.csv").string()}});
  CHECK_THROWS_WITH_AS(cmd_complete(with_config(dir / "missing.json", out)),
                       doctest::Contains("absent.csv"), std::runtime_error);

  write_config(dir / "noinput.json", nlohmann::json::object());
  CHECK_THROWS_WITH_AS(cmd_complete(with_config(dir / "noinput.json", out)),
                       doctest::Contains("input"), std::runtime_error);

  write_config(dir / "badtasks.json", {{"tasks", (dir / "ghost.jsonl").string()}});
  CHECK_THROWS_WITH_AS(cmd_pipeline(with_config(dir / "badtasks.json", out)),
                       doctest::Contains("ghost.jsonl"), std::runtime_error);

  CommonOptions no_file;
  no_file.config_path = (dir / "nowhere.json").string();
  no_file.out_dir = out.string();
  CHECK_THROWS_WITH_AS(cmd_simulate(no_file), doctest::Contains("nowhere.json"),
                       std::runtime_error);
}
