#include "robusttc/combiner.hpp"

#include "robusttc/io.hpp"
#include "robusttc/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace robusttc {

namespace {

constexpr Scalar kNaN = std::numeric_limits<Scalar>::quiet_NaN();

/// Label posteriors of every encoder for every training query, holding the
/// query out of its own support when more than one example exists. Also the
/// per-cluster argmax accuracies under the same protocol.
struct TrainPosteriors {
  std::vector<Matrix> per_query;  // K x L each
  Vector cluster_accuracy;        // K
};

TrainPosteriors train_posteriors(const Task& task, const MetaModel& meta) {
  const auto k = static_cast<Index>(meta.encoders.size());
  const auto m = task.train.size();
  TrainPosteriors out;
  out.cluster_accuracy = Vector::Zero(k);
  for (size_t q = 0; q < m; ++q) {
    std::vector<LabeledExample> rest;
    rest.reserve(m > 1 ? m - 1 : 1);
    if (m > 1) {
      for (size_t i = 0; i < m; ++i)
        if (i != q) rest.push_back(task.train[i]);
    } else {
      rest.push_back(task.train[q]);
    }
    const SupportSet support = make_support(std::move(rest), task.num_labels);
    Matrix posteriors(k, task.num_labels);
    for (Index c = 0; c < k; ++c) {
      const Vector p = cluster_posterior(task.train[q].features, support, meta.encoders[c]);
      posteriors.row(c) = p.transpose();
      if (argmax(p) == task.train[q].label) out.cluster_accuracy(c) += 1.0;
    }
    out.per_query.push_back(std::move(posteriors));
  }
  out.cluster_accuracy /= static_cast<Scalar>(m);
  return out;
}

Scalar alpha_loss(const std::vector<Matrix>& posteriors, const std::vector<LabeledExample>& train,
                  const Vector& alpha) {
  Scalar total = 0;
  for (size_t q = 0; q < posteriors.size(); ++q) {
    const Vector scores = posteriors[q].transpose() * alpha;
    const Vector p = softmax(scores);
    total += -std::log(std::max(p(train[q].label), 1e-12));
  }
  return total / static_cast<Scalar>(posteriors.size());
}

Vector alpha_gradient(const std::vector<Matrix>& posteriors,
                      const std::vector<LabeledExample>& train, const Vector& alpha) {
  Vector grad = Vector::Zero(alpha.size());
  for (size_t q = 0; q < posteriors.size(); ++q) {
    const Vector scores = posteriors[q].transpose() * alpha;
    Vector delta = softmax(scores);
    delta(train[q].label) -= 1.0;
    grad += posteriors[q] * delta;
  }
  return grad / static_cast<Scalar>(posteriors.size());
}

FewShotModel make_model(const Task& task, const MetaModel& meta) {
  FewShotModel model;
  model.encoders = meta.encoders;
  model.alpha =
      Vector::Constant(static_cast<Index>(meta.encoders.size()),
                       1.0 / static_cast<Scalar>(meta.encoders.size()));
  model.support = make_support(task.train, task.num_labels);
  return model;
}

}  // namespace

MetaModel train_meta_encoders(const std::vector<Task>& tasks, const Partition& partition,
                              const TrainConfig& config, std::uint64_t seed) {
  if (partition.size() != static_cast<Index>(tasks.size()))
    throw std::invalid_argument("train_meta_encoders: partition size does not match tasks");
  MetaModel meta;
  meta.partition = partition;
  for (int c = 0; c < partition.num_clusters; ++c) {
    std::vector<Task> cluster;
    for (Index i : partition.members(c)) cluster.push_back(tasks[i]);
    meta.encoders.push_back(
        train_cluster_encoder(cluster, config, derive_seed(seed, static_cast<std::uint64_t>(c))));
  }
  return meta;
}

MetaModel single_metric_meta(const std::vector<Task>& tasks, const TrainConfig& config,
                             std::uint64_t seed) {
  if (tasks.empty()) throw std::invalid_argument("single_metric_meta: no tasks");
  Partition all_one(std::vector<int>(tasks.size(), 0), 1);
  return train_meta_encoders(tasks, all_one, config, seed);
}

Vector cluster_posterior(const Vector& x, const SupportSet& support, const Encoder& enc) {
  return mnet_predict(x, support, enc);
}

Vector combine_scores(const Vector& x, const SupportSet& support, const FewShotModel& model) {
  if (model.encoders.empty()) throw std::invalid_argument("combine_scores: no encoders");
  if (model.alpha.size() != static_cast<Index>(model.encoders.size()))
    throw std::invalid_argument("combine_scores: alpha length does not match encoders");
  Vector scores = Vector::Zero(support.num_labels);
  for (size_t c = 0; c < model.encoders.size(); ++c)
    scores += model.alpha(static_cast<Index>(c)) *
              cluster_posterior(x, support, model.encoders[c]);
  return softmax(scores);
}

FewShotModel fit_alpha(const Task& task, const MetaModel& meta, const CombinerHyper& hyper) {
  task.validate(false);
  if (meta.encoders.empty()) throw std::invalid_argument("fit_alpha: meta model has no encoders");

  FewShotModel model = make_model(task, meta);
  const auto posteriors = train_posteriors(task, meta);
  model.best_cluster_train_acc = posteriors.cluster_accuracy.maxCoeff();

  Scalar lr = hyper.lr;
  Scalar loss = alpha_loss(posteriors.per_query, task.train, model.alpha);
  for (int step = 0; step < hyper.steps; ++step) {
    const Vector grad = alpha_gradient(posteriors.per_query, task.train, model.alpha);
    if (grad.norm() == 0.0) break;
    Vector candidate = model.alpha - lr * grad;
    Scalar candidate_loss = alpha_loss(posteriors.per_query, task.train, candidate);
    while (candidate_loss > loss && lr > 1e-12) {
      lr /= 2;
      candidate = model.alpha - lr * grad;
      candidate_loss = alpha_loss(posteriors.per_query, task.train, candidate);
    }
    if (candidate_loss > loss) break;
    model.alpha = candidate;
    loss = candidate_loss;
  }
  return model;
}

FewShotModel adaptive_select(const Task& task, const MetaModel& meta, Scalar threshold,
                             const CombinerHyper& hyper) {
  task.validate(false);
  const auto posteriors = train_posteriors(task, meta);
  const Scalar best = posteriors.cluster_accuracy.maxCoeff();
  if (best < threshold) {
    FewShotModel model = make_model(task, meta);
    model.best_cluster_train_acc = best;
    model.fallback = train_single_task(task, hyper.train, derive_seed(hyper.seed, 1));
    model.used_fallback = true;
    return model;
  }
  return fit_alpha(task, meta, hyper);
}

int fewshot_predict_label(const FewShotModel& model, const Vector& x) {
  if (model.used_fallback) return argmax(model.fallback->predict(x));
  return argmax(combine_scores(x, model.support, model));
}

Scalar fewshot_accuracy(const FewShotModel& model, const std::vector<LabeledExample>& split) {
  if (split.empty()) throw std::invalid_argument("fewshot_accuracy: empty split");
  int correct = 0;
  for (const auto& ex : split)
    if (fewshot_predict_label(model, ex.features) == ex.label) ++correct;
  return static_cast<Scalar>(correct) / static_cast<Scalar>(split.size());
}

std::vector<TargetResult> evaluate_targets(const MetaModel& meta,
                                           const std::vector<Task>& targets,
                                           const CombinerHyper& hyper, bool adaptive,
                                           Scalar threshold, const std::string& method,
                                           std::vector<FewShotModel>* models) {
  std::vector<TargetResult> rows;
  for (size_t j = 0; j < targets.size(); ++j) {
    CombinerHyper h = hyper;
    h.seed = derive_seed(hyper.seed, 2, static_cast<std::uint64_t>(j));
    FewShotModel model = adaptive ? adaptive_select(targets[j], meta, threshold, h)
                                  : fit_alpha(targets[j], meta, h);
    TargetResult row;
    row.target_id = targets[j].id;
    row.method = method;
    row.used_fallback = model.used_fallback;
    row.train_acc_best_cluster = model.best_cluster_train_acc;
    row.test_accuracy = fewshot_accuracy(model, targets[j].test);
    rows.push_back(std::move(row));
    if (models) models->push_back(std::move(model));
  }
  return rows;
}

Scalar macro_accuracy(const std::vector<TargetResult>& results) {
  if (results.empty()) return kNaN;
  Scalar total = 0;
  for (const auto& r : results) total += r.test_accuracy;
  return total / static_cast<Scalar>(results.size());
}

FslResult robust_tc_fsl(const std::vector<Task>& meta_train, int k,
                        const std::vector<Task>& targets, const PipelineParams& params,
                        std::uint64_t seed) {
  FslResult result;
  result.clustering = robust_tc(meta_train, k, params.tc, derive_seed(seed, 0));
  result.meta = train_meta_encoders(meta_train, result.clustering.partition, params.tc.train,
                                    derive_seed(seed, 1));
  CombinerHyper hyper = params.combiner;
  hyper.seed = derive_seed(seed, 2);
  result.targets = evaluate_targets(result.meta, targets, hyper, params.adaptive,
                                    params.fallback_threshold,
                                    params.adaptive ? "adaptive" : "robust_tc_fsl",
                                    &result.models);
  result.macro = macro_accuracy(result.targets);
  return result;
}

void write_results_csv(const std::filesystem::path& path,
                       const std::vector<TargetResult>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "target_id,method,used_fallback,train_acc_best_cluster,test_accuracy\n";
  for (const auto& r : rows) {
    out << r.target_id << "," << r.method << "," << (r.used_fallback ? "true" : "false")
        << ","
        << (std::isnan(r.train_acc_best_cluster) ? std::string("NA")
                                                 : format_scalar(r.train_acc_best_cluster))
        << "," << format_scalar(r.test_accuracy) << "\n";
  }
}

void write_summary_json(const std::filesystem::path& path,
                        const std::map<std::string, Scalar>& macro_by_method) {
  nlohmann::json j;
  j["macro_accuracy"] = nlohmann::json::object();
  for (const auto& [method, value] : macro_by_method)
    if (!std::isnan(value)) j["macro_accuracy"][method] = value;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace robusttc
