#pragma once

#include "robusttc/clustering.hpp"
#include "robusttc/encoder.hpp"
#include "robusttc/task.hpp"
#include "robusttc/transfer.hpp"
#include "robusttc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace robusttc {

/// The clustering stage's product: a partition of the meta-training tasks
/// and one frozen encoder per cluster.
struct MetaModel {
  Partition partition;
  std::vector<Encoder> encoders;
};

/// Trains one cluster-encoder per cluster of the partition.
MetaModel train_meta_encoders(const std::vector<Task>& tasks, const Partition& partition,
                              const TrainConfig& config, std::uint64_t seed);

/// Degenerate one-cluster meta model: a single encoder trained on every
/// task. The single-metric baseline.
MetaModel single_metric_meta(const std::vector<Task>& tasks, const TrainConfig& config,
                             std::uint64_t seed);

/// A target-task predictor: frozen cluster-encoders combined with weights
/// alpha over a few-shot support set, or a fallback single-task model.
struct FewShotModel {
  std::vector<Encoder> encoders;
  Vector alpha;
  SupportSet support;
  std::optional<SingleTaskModel> fallback;
  bool used_fallback = false;
  Scalar best_cluster_train_acc = 0.0;
};

/// Per-encoder label posterior: attention over individual support
/// instances aggregated by label (identical in form to mnet_predict).
Vector cluster_posterior(const Vector& x, const SupportSet& support, const Encoder& enc);

/// Softmax over the combined scores sum_k alpha_k * P(y | x; f_k). The
/// argmax is that of the raw combination; the softmax only normalizes.
Vector combine_scores(const Vector& x, const SupportSet& support, const FewShotModel& model);

struct CombinerHyper {
  Scalar lr = 0.5;
  int steps = 100;
  /// Protocol for the fallback single-task model.
  TrainConfig train;
  std::uint64_t seed = 0;
};

/// Fits alpha (initialized uniform 1/K) by gradient descent with step-size
/// halving on the cross-entropy of combine_scores over the few-shot train
/// split. Training predictions hold the query out of its own support when
/// the split allows it, so self-similarity does not dominate. Encoders are
/// never modified.
FewShotModel fit_alpha(const Task& task, const MetaModel& meta, const CombinerHyper& hyper);

/// Gates on the best per-cluster training accuracy (measured with the same
/// held-out-query protocol as fit_alpha): strictly below the threshold, a
/// fallback single-task model is trained instead and used_fallback is set.
FewShotModel adaptive_select(const Task& task, const MetaModel& meta, Scalar threshold,
                             const CombinerHyper& hyper);

/// Argmax prediction for one query, routing through the fallback when set.
int fewshot_predict_label(const FewShotModel& model, const Vector& x);

Scalar fewshot_accuracy(const FewShotModel& model, const std::vector<LabeledExample>& split);

struct TargetResult {
  std::string target_id;
  std::string method;
  bool used_fallback = false;
  Scalar train_acc_best_cluster = 0.0;  // NaN when not applicable
  Scalar test_accuracy = 0.0;
};

/// Fits and evaluates every target against the frozen meta model. Per-target
/// seeds derive from hyper.seed and the target index. When `models` is given
/// it receives the fitted per-target models, index-aligned with the rows.
std::vector<TargetResult> evaluate_targets(const MetaModel& meta,
                                           const std::vector<Task>& targets,
                                           const CombinerHyper& hyper, bool adaptive,
                                           Scalar threshold, const std::string& method,
                                           std::vector<FewShotModel>* models = nullptr);

/// Unweighted mean of per-target test accuracies; NaN when empty.
Scalar macro_accuracy(const std::vector<TargetResult>& results);

struct PipelineParams {
  RobustTcParams tc;
  CombinerHyper combiner;
  bool adaptive = false;
  Scalar fallback_threshold = 0.2;
};

struct FslResult {
  RobustTcResult clustering;
  MetaModel meta;
  std::vector<TargetResult> targets;
  std::vector<FewShotModel> models;
  Scalar macro = 0.0;
};

/// End-to-end few-shot pipeline: robust_tc clustering, per-cluster encoder
/// training, per-target combination (adaptive or plain), macro-averaged
/// test accuracy.
FslResult robust_tc_fsl(const std::vector<Task>& meta_train, int k,
                        const std::vector<Task>& targets, const PipelineParams& params,
                        std::uint64_t seed);

/// CSV with columns target_id,method,used_fallback,train_acc_best_cluster,
/// test_accuracy; NaN fields written as NA.
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<TargetResult>& rows);

/// JSON object {"macro_accuracy": {method: value, ...}}; NaN entries omitted.
void write_summary_json(const std::filesystem::path& path,
                        const std::map<std::string, Scalar>& macro_by_method);

}  // namespace robusttc
