#include "robusttc/commands.hpp"

#include "robusttc/bench.hpp"
#include "robusttc/combiner.hpp"
#include "robusttc/io.hpp"
#include "robusttc/rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace robusttc {

namespace {

using nlohmann::json;

json load_config(const CommonOptions& options) {
  if (!options.config_path) return json::object();
  std::ifstream in(*options.config_path);
  if (!in)
    throw std::runtime_error("config: cannot open " + *options.config_path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error("config: invalid JSON in " + *options.config_path);
  if (!j.is_object()) throw std::runtime_error("config: top level must be an object");
  return j;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::runtime_error("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

std::filesystem::path resolve_out_dir(const CommonOptions& options, const json& config) {
  std::string dir = get_or<std::string>(config, "out", "run");
  if (options.out_dir) dir = *options.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

std::uint64_t resolve_seed(const CommonOptions& options, const json& config) {
  std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 0);
  if (options.seed) seed = *options.seed;
  return seed;
}

TaskSuiteSpec parse_suite_spec(const json& j, std::uint64_t seed) {
  reject_unknown_keys(j,
                      {"num_clusters", "tasks_per_cluster", "min_labels_per_task",
                       "max_labels_per_task", "instances_per_label", "ambient_dim",
                       "subspace_dim", "noise_scale", "num_targets", "target_shots",
                       "target_queries_per_label", "include_novel_target",
                       "novel_target_labels"},
                      "suite");
  TaskSuiteSpec spec;
  spec.num_clusters = get_or(j, "num_clusters", spec.num_clusters);
  spec.tasks_per_cluster = get_or(j, "tasks_per_cluster", spec.tasks_per_cluster);
  spec.min_labels_per_task = get_or(j, "min_labels_per_task", spec.min_labels_per_task);
  spec.max_labels_per_task = get_or(j, "max_labels_per_task", spec.max_labels_per_task);
  spec.instances_per_label = get_or(j, "instances_per_label", spec.instances_per_label);
  spec.ambient_dim = get_or(j, "ambient_dim", spec.ambient_dim);
  spec.subspace_dim = get_or(j, "subspace_dim", spec.subspace_dim);
  spec.noise_scale = get_or(j, "noise_scale", spec.noise_scale);
  spec.num_targets = get_or(j, "num_targets", spec.num_targets);
  spec.target_shots = get_or(j, "target_shots", spec.target_shots);
  spec.target_queries_per_label =
      get_or(j, "target_queries_per_label", spec.target_queries_per_label);
  spec.include_novel_target = get_or(j, "include_novel_target", spec.include_novel_target);
  spec.novel_target_labels = get_or(j, "novel_target_labels", spec.novel_target_labels);
  spec.seed = seed;
  spec.validate();
  return spec;
}

TrainConfig parse_train_config(const json& j) {
  reject_unknown_keys(j,
                      {"embed_dim", "lr", "epochs", "episode_lr", "episodes",
                       "support_per_class", "batch_size", "eval_every", "head"},
                      "train");
  TrainConfig config;
  config.embed_dim = get_or(j, "embed_dim", config.embed_dim);
  config.lr = get_or(j, "lr", config.lr);
  config.epochs = get_or(j, "epochs", config.epochs);
  config.episode_lr = get_or(j, "episode_lr", config.episode_lr);
  config.episodes = get_or(j, "episodes", config.episodes);
  config.support_per_class = get_or(j, "support_per_class", config.support_per_class);
  config.batch_size = get_or(j, "batch_size", config.batch_size);
  config.eval_every = get_or(j, "eval_every", config.eval_every);
  if (j.contains("head")) {
    const auto head = j.at("head").get<std::string>();
    if (head == "mnet")
      config.head = PredictionHead::MNet;
    else if (head == "protonet")
      config.head = PredictionHead::ProtoNet;
    else
      throw std::runtime_error("config: head must be 'mnet' or 'protonet'");
  }
  config.validate();
  return config;
}

std::vector<std::string> index_ids(Index n) {
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

}  // namespace

void cmd_simulate(const CommonOptions& options) {
  const json config = load_config(options);
  reject_unknown_keys(
      config, {"mode", "n", "k", "observe_frac", "corrupt_frac", "suite", "seed", "out"},
      "simulate");
  const auto out = resolve_out_dir(options, config);
  const auto seed = resolve_seed(options, config);
  const auto mode = get_or<std::string>(config, "mode", "matrix");

  if (mode == "matrix") {
    const Index n = get_or<Index>(config, "n", 30);
    int k = get_or(config, "k", 3);
    if (options.k) k = *options.k;
    const Scalar observe_frac = get_or<Scalar>(config, "observe_frac", 1.0);
    const Scalar corrupt_frac = get_or<Scalar>(config, "corrupt_frac", 0.0);

    auto inst = planted_partition_matrix(n, k, derive_seed(seed, 0));
    auto observed = observe_and_corrupt(inst, observe_frac, corrupt_frac, derive_seed(seed, 1));
    write_matrix_csv(out / "X_star.csv", inst.x_star);
    write_partial_matrix_csv(out / "observed.csv", observed);
    write_partition_csv(out / "ground_truth.csv", inst.partition, index_ids(n));
  } else if (mode == "tasks") {
    auto spec = parse_suite_spec(config.contains("suite") ? config.at("suite") : json::object(),
                                 seed);
    if (options.k) spec.num_clusters = *options.k;
    const auto suite = generate_task_suite(spec);
    write_tasks_jsonl(out / "tasks.jsonl", suite.tasks);
    write_tasks_jsonl(out / "targets.jsonl", suite.targets);
    std::vector<std::string> ids;
    for (const auto& task : suite.tasks) ids.push_back(task.id);
    write_partition_csv(out / "ground_truth.csv", suite.ground_truth, ids);
  } else {
    throw std::runtime_error("simulate: mode must be 'matrix' or 'tasks'");
  }
}

void cmd_complete(const CommonOptions& options) {
  const json config = load_config(options);
  reject_unknown_keys(
      config, {"input", "lambda", "rho", "max_iters", "tol", "symmetric", "seed", "out"},
      "complete");
  const auto out = resolve_out_dir(options, config);
  if (!config.contains("input"))
    throw std::runtime_error("complete: config must name an 'input' matrix CSV");
  const auto input = config.at("input").get<std::string>();
  if (!std::filesystem::exists(input))
    throw std::runtime_error("complete: input not found: " + input);
  const PartialMatrix y = read_partial_matrix_csv(input);

  SolverConfig solver = SolverConfig::defaults(y.n());
  solver.lambda = get_or(config, "lambda", solver.lambda);
  if (options.lambda) solver.lambda = *options.lambda;
  solver.rho = get_or(config, "rho", solver.rho);
  solver.max_iters = get_or(config, "max_iters", solver.max_iters);
  solver.tol = get_or(config, "tol", solver.tol);
  solver.symmetric = get_or(config, "symmetric", y.is_symmetric());

  const auto result = complete(y, solver);
  write_matrix_csv(out / "X.csv", result.X);
  write_matrix_csv(out / "E.csv", result.E);
  write_diagnostics_json(out / "diagnostics.json", result);
}

namespace {

void write_alphas_csv(const std::filesystem::path& path, const std::vector<Task>& targets,
                      const std::vector<FewShotModel>& models) {
  std::ofstream outfile(path);
  if (!outfile) throw std::runtime_error("cannot open for writing: " + path.string());
  const Index k = models.empty() ? 0 : models.front().alpha.size();
  outfile << "target_id";
  for (Index c = 0; c < k; ++c) outfile << ",alpha_" << c;
  outfile << "\n";
  for (size_t j = 0; j < targets.size(); ++j) {
    outfile << targets[j].id;
    for (Index c = 0; c < models[j].alpha.size(); ++c)
      outfile << "," << format_scalar(models[j].alpha(c));
    outfile << "\n";
  }
}

}  // namespace

void cmd_pipeline(const CommonOptions& options) {
  const json config = load_config(options);
  reject_unknown_keys(config,
                      {"suite", "tasks", "targets", "k", "budget", "p1", "p2", "lambda",
                       "threshold", "train", "combiner_lr", "combiner_steps", "seed", "out"},
                      "pipeline");
  const auto out = resolve_out_dir(options, config);
  const auto seed = resolve_seed(options, config);

  std::vector<Task> meta_train;
  std::vector<Task> targets;
  if (config.contains("tasks")) {
    const auto tasks_path = config.at("tasks").get<std::string>();
    if (!std::filesystem::exists(tasks_path))
      throw std::runtime_error("pipeline stage load: tasks file not found: " + tasks_path);
    meta_train = read_tasks_jsonl(tasks_path);
    if (config.contains("targets")) {
      const auto targets_path = config.at("targets").get<std::string>();
      if (!std::filesystem::exists(targets_path))
        throw std::runtime_error("pipeline stage load: targets file not found: " +
                                 targets_path);
      targets = read_tasks_jsonl(targets_path);
    }
  } else {
    const auto spec = parse_suite_spec(
        config.contains("suite") ? config.at("suite") : json::object(),
        derive_seed(seed, 100));
    auto suite = generate_task_suite(spec);
    meta_train = std::move(suite.tasks);
    targets = std::move(suite.targets);
    write_tasks_jsonl(out / "tasks.jsonl", meta_train);
    write_tasks_jsonl(out / "targets.jsonl", targets);
    std::vector<std::string> ids;
    for (const auto& task : meta_train) ids.push_back(task.id);
    write_partition_csv(out / "ground_truth.csv", suite.ground_truth, ids);
  }

  int k = get_or(config, "k", 2);
  if (options.k) k = *options.k;

  PipelineParams params;
  params.tc.train = parse_train_config(config.contains("train") ? config.at("train")
                                                                : json::object());
  params.tc.budget = get_or<Scalar>(config, "budget", params.tc.budget);
  if (options.budget) params.tc.budget = *options.budget;
  params.tc.filter_params.p1 = get_or<Scalar>(config, "p1", params.tc.filter_params.p1);
  if (options.p1) params.tc.filter_params.p1 = *options.p1;
  params.tc.filter_params.p2 = get_or<Scalar>(config, "p2", params.tc.filter_params.p2);
  if (options.p2) params.tc.filter_params.p2 = *options.p2;
  if (config.contains("lambda")) params.tc.solver.lambda = config.at("lambda").get<Scalar>();
  if (options.lambda) params.tc.solver.lambda = *options.lambda;
  params.tc.artifact_dir = out;
  params.combiner.lr = get_or<Scalar>(config, "combiner_lr", params.combiner.lr);
  params.combiner.steps = get_or(config, "combiner_steps", params.combiner.steps);
  params.combiner.train = params.tc.train;
  Scalar threshold = get_or<Scalar>(config, "threshold", 0.2);
  if (options.threshold) threshold = *options.threshold;
  params.fallback_threshold = threshold;

  // Clustered pipeline, plain combination.
  params.adaptive = false;
  const auto fsl = robust_tc_fsl(meta_train, k, targets, params, derive_seed(seed, 101));
  for (size_t c = 0; c < fsl.meta.encoders.size(); ++c)
    save_encoder(out / ("encoder_" + std::to_string(c) + ".json"), fsl.meta.encoders[c]);

  std::vector<TargetResult> rows = fsl.targets;

  // Adaptive variant over the same meta model.
  CombinerHyper adaptive_hyper = params.combiner;
  adaptive_hyper.seed = derive_seed(seed, 105);
  std::vector<FewShotModel> adaptive_models;
  const auto adaptive_rows = evaluate_targets(fsl.meta, targets, adaptive_hyper, true,
                                              threshold, "adaptive", &adaptive_models);
  rows.insert(rows.end(), adaptive_rows.begin(), adaptive_rows.end());

  // Single-metric baseline: one encoder over all meta-training tasks.
  const auto metric1 =
      single_metric_meta(meta_train, params.tc.train, derive_seed(seed, 102));
  CombinerHyper single_hyper = params.combiner;
  single_hyper.seed = derive_seed(seed, 103);
  const auto single_metric_rows =
      evaluate_targets(metric1, targets, single_hyper, false, threshold, "single_metric");
  rows.insert(rows.end(), single_metric_rows.begin(), single_metric_rows.end());

  // Single-task baseline: each target trains its own model from scratch.
  std::vector<TargetResult> single_task_rows;
  for (size_t j = 0; j < targets.size(); ++j) {
    SingleTaskModel model = train_single_task(
        targets[j], params.tc.train, derive_seed(seed, 104, static_cast<std::uint64_t>(j)));
    TargetResult row;
    row.target_id = targets[j].id;
    row.method = "single_task";
    row.train_acc_best_cluster = std::numeric_limits<Scalar>::quiet_NaN();
    row.test_accuracy = model_accuracy(model, targets[j].test);
    single_task_rows.push_back(row);
  }
  rows.insert(rows.end(), single_task_rows.begin(), single_task_rows.end());

  // Alpha audit trail for the two clustered variants.
  write_alphas_csv(out / "alphas_robust_tc_fsl.csv", targets, fsl.models);
  write_alphas_csv(out / "alphas_adaptive.csv", targets, adaptive_models);

  write_results_csv(out / "results.csv", rows);
  write_summary_json(out / "summary.json",
                     {{"robust_tc_fsl", macro_accuracy(fsl.targets)},
                      {"adaptive", macro_accuracy(adaptive_rows)},
                      {"single_metric", macro_accuracy(single_metric_rows)},
                      {"single_task", macro_accuracy(single_task_rows)}});
}

void cmd_sweep(const CommonOptions& options) {
  const json config = load_config(options);
  reject_unknown_keys(config,
                      {"n", "k", "observe_grid", "corrupt_grid", "trials", "seed", "out"},
                      "sweep");
  const auto out = resolve_out_dir(options, config);
  const auto seed = resolve_seed(options, config);
  const Index n = get_or<Index>(config, "n", 100);
  int k = get_or(config, "k", 4);
  if (options.k) k = *options.k;
  const auto observe_grid = get_or<std::vector<Scalar>>(
      config, "observe_grid", {0.05, 0.1, 0.2, 0.4, 0.8});
  const auto corrupt_grid =
      get_or<std::vector<Scalar>>(config, "corrupt_grid", {0.05});
  const int trials = get_or(config, "trials", 20);

  const auto cells = recovery_sweep(n, k, observe_grid, corrupt_grid, trials, seed);
  write_sweep_csv(out / "sweep.csv", cells);
}

}  // namespace robusttc
