#include "robusttc/encoder.hpp"

#include "robusttc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace robusttc {

namespace {

constexpr Scalar kProbFloor = 1e-12;

void check_dims(const Vector& x, const SupportSet& support, const Encoder& enc) {
  if (support.instances.empty())
    throw std::invalid_argument("predict: empty support set");
  if (x.size() != enc.input_dim())
    throw std::invalid_argument("predict: query dimension does not match encoder");
  for (const auto& inst : support.instances) {
    if (inst.features.size() != enc.input_dim())
      throw std::invalid_argument("predict: support dimension does not match encoder");
    if (inst.label < 0 || inst.label >= support.num_labels)
      throw std::invalid_argument("predict: support label out of range");
  }
}

}  // namespace

Encoder init_encoder(Index input_dim, Index embed_dim, std::uint64_t seed) {
  if (input_dim < 1 || embed_dim < 1)
    throw std::invalid_argument("init_encoder: dimensions must be positive");
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(input_dim));
  std::uniform_real_distribution<Scalar> uniform(-bound, bound);
  auto engine = make_engine(seed);
  Encoder enc;
  enc.weights.resize(embed_dim, input_dim);
  for (Index i = 0; i < embed_dim; ++i)
    for (Index j = 0; j < input_dim; ++j) enc.weights(i, j) = uniform(engine);
  return enc;
}

void save_encoder(const std::filesystem::path& path, const Encoder& enc) {
  nlohmann::json j;
  j["input_dim"] = enc.input_dim();
  j["embed_dim"] = enc.embed_dim();
  std::vector<Scalar> flat;
  flat.reserve(static_cast<size_t>(enc.weights.size()));
  for (Index i = 0; i < enc.embed_dim(); ++i)
    for (Index k = 0; k < enc.input_dim(); ++k) flat.push_back(enc.weights(i, k));
  j["weights"] = flat;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

Encoder load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  nlohmann::json j;
  in >> j;
  const Index d = j.at("input_dim").get<Index>();
  const Index e = j.at("embed_dim").get<Index>();
  const auto flat = j.at("weights").get<std::vector<Scalar>>();
  if (static_cast<Index>(flat.size()) != d * e)
    throw std::runtime_error(path.string() + ": weight count does not match dims");
  Encoder enc;
  enc.weights.resize(e, d);
  size_t pos = 0;
  for (Index i = 0; i < e; ++i)
    for (Index k = 0; k < d; ++k) enc.weights(i, k) = flat[pos++];
  return enc;
}

SupportSet make_support(std::vector<LabeledExample> examples, int num_labels) {
  if (examples.empty()) throw std::invalid_argument("make_support: no instances");
  if (num_labels < 1) throw std::invalid_argument("make_support: num_labels must be >= 1");
  for (const auto& ex : examples)
    if (ex.label < 0 || ex.label >= num_labels)
      throw std::invalid_argument("make_support: label out of range");
  return SupportSet{std::move(examples), num_labels};
}

void TrainConfig::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("train config: embed_dim must be >= 1");
  if (lr <= 0 || episode_lr <= 0)
    throw std::invalid_argument("train config: learning rates must be > 0");
  if (epochs < 0 || episodes < 0)
    throw std::invalid_argument("train config: epochs and episodes must be >= 0");
  if (support_per_class < 1)
    throw std::invalid_argument("train config: support_per_class must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
}

Vector softmax(const Vector& scores) {
  const Vector shifted = scores.array() - scores.maxCoeff();
  Vector exps = shifted.array().exp();
  return exps / exps.sum();
}

int argmax(const Vector& v) {
  int best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

Vector mnet_predict(const Vector& x, const SupportSet& support, const Encoder& enc) {
  check_dims(x, support, enc);
  const Vector fx = enc.embed(x);
  Vector scores(static_cast<Index>(support.instances.size()));
  for (size_t i = 0; i < support.instances.size(); ++i)
    scores(static_cast<Index>(i)) = fx.dot(enc.embed(support.instances[i].features));
  const Vector alpha = softmax(scores);
  Vector probs = Vector::Zero(support.num_labels);
  for (size_t i = 0; i < support.instances.size(); ++i)
    probs(support.instances[i].label) += alpha(static_cast<Index>(i));
  return probs;
}

Vector protonet_predict(const Vector& x, const SupportSet& support, const Encoder& enc) {
  check_dims(x, support, enc);
  std::vector<int> counts(support.num_labels, 0);
  Matrix class_sums = Matrix::Zero(enc.input_dim(), support.num_labels);
  for (const auto& inst : support.instances) {
    class_sums.col(inst.label) += inst.features;
    ++counts[inst.label];
  }
  for (int l = 0; l < support.num_labels; ++l)
    if (counts[l] == 0)
      throw std::invalid_argument("protonet_predict: class " + std::to_string(l) +
                                  " has no support instance");
  const Vector fx = enc.embed(x);
  Vector scores(support.num_labels);
  for (int l = 0; l < support.num_labels; ++l)
    scores(l) = fx.dot(enc.embed(class_sums.col(l)));
  return softmax(scores);
}

Scalar episode_loss(const Episode& episode, const Encoder& enc, PredictionHead head) {
  if (episode.batch.empty()) throw std::invalid_argument("episode_loss: empty batch");
  Scalar total = 0;
  for (const auto& q : episode.batch) {
    if (q.label < 0 || q.label >= episode.support.num_labels)
      throw std::invalid_argument("episode_loss: batch label out of range");
    const Vector p = head == PredictionHead::MNet
                         ? mnet_predict(q.features, episode.support, enc)
                         : protonet_predict(q.features, episode.support, enc);
    total += -std::log(std::max(p(q.label), kProbFloor));
  }
  return total / static_cast<Scalar>(episode.batch.size());
}

std::pair<Scalar, Matrix> episode_loss_and_gradient(const Episode& episode,
                                                    const Encoder& enc,
                                                    PredictionHead head) {
  if (episode.batch.empty())
    throw std::invalid_argument("episode_loss_and_gradient: empty batch");
  const auto& support = episode.support;
  const Matrix& w = enc.weights;
  Scalar total = 0;
  Matrix grad = Matrix::Zero(w.rows(), w.cols());

  for (const auto& q : episode.batch) {
    if (q.label < 0 || q.label >= support.num_labels)
      throw std::invalid_argument("episode_loss_and_gradient: batch label out of range");
    const Vector& x = q.features;

    if (head == PredictionHead::MNet) {
      const Vector alpha_probs = mnet_predict(x, support, enc);
      const Scalar pt = alpha_probs(q.label);
      total += -std::log(std::max(pt, kProbFloor));
      if (pt <= kProbFloor) continue;

      const Vector fx = w * x;
      Vector scores(static_cast<Index>(support.instances.size()));
      for (size_t i = 0; i < support.instances.size(); ++i)
        scores(static_cast<Index>(i)) = fx.dot(w * support.instances[i].features);
      const Vector alpha = softmax(scores);
      for (size_t i = 0; i < support.instances.size(); ++i) {
        const auto& xi = support.instances[i].features;
        const Scalar match = support.instances[i].label == q.label ? 1.0 : 0.0;
        const Scalar g = -alpha(static_cast<Index>(i)) * (match - pt) / pt;
        if (g == 0.0) continue;
        grad.noalias() += g * (w * (x * xi.transpose() + xi * x.transpose()));
      }
    } else {
      Matrix class_sums = Matrix::Zero(w.cols(), support.num_labels);
      for (const auto& inst : support.instances) class_sums.col(inst.label) += inst.features;
      const Vector p = protonet_predict(x, support, enc);
      total += -std::log(std::max(p(q.label), kProbFloor));
      if (p(q.label) <= kProbFloor) continue;
      for (int l = 0; l < support.num_labels; ++l) {
        const Scalar g = p(l) - (l == q.label ? 1.0 : 0.0);
        const Vector zl = class_sums.col(l);
        grad.noalias() += g * (w * (x * zl.transpose() + zl * x.transpose()));
      }
    }
  }
  const auto b = static_cast<Scalar>(episode.batch.size());
  return {total / b, grad / b};
}

namespace {

std::vector<std::vector<size_t>> indices_by_label(const std::vector<LabeledExample>& split,
                                                  int num_labels) {
  std::vector<std::vector<size_t>> by_label(num_labels);
  for (size_t i = 0; i < split.size(); ++i) by_label[split[i].label].push_back(i);
  return by_label;
}

/// Deterministic evaluation support: the first support_per_class instances
/// of each class, in train-split order.
Episode held_out_episode(const Task& task, const TrainConfig& config) {
  auto by_label = indices_by_label(task.train, task.num_labels);
  Episode ep;
  ep.support.num_labels = task.num_labels;
  for (int l = 0; l < task.num_labels; ++l) {
    if (by_label[l].empty())
      throw std::invalid_argument("train_cluster_encoder: task " + task.id + " class " +
                                  std::to_string(l) + " absent from train split");
    const size_t take = std::min<size_t>(config.support_per_class, by_label[l].size());
    for (size_t i = 0; i < take; ++i)
      ep.support.instances.push_back(task.train[by_label[l][i]]);
  }
  ep.batch = task.valid;
  return ep;
}

Episode sample_episode(const Task& task, const TrainConfig& config, std::mt19937_64& engine) {
  auto by_label = indices_by_label(task.train, task.num_labels);
  Episode ep;
  ep.support.num_labels = task.num_labels;
  std::vector<size_t> remaining;
  for (int l = 0; l < task.num_labels; ++l) {
    auto& idx = by_label[l];
    if (idx.empty())
      throw std::invalid_argument("train_cluster_encoder: task " + task.id + " class " +
                                  std::to_string(l) + " absent from train split");
    std::shuffle(idx.begin(), idx.end(), engine);
    const size_t take = std::min<size_t>(config.support_per_class, idx.size());
    for (size_t i = 0; i < take; ++i) ep.support.instances.push_back(task.train[idx[i]]);
    remaining.insert(remaining.end(), idx.begin() + take, idx.end());
  }
  std::shuffle(remaining.begin(), remaining.end(), engine);
  const size_t batch = std::min<size_t>(config.batch_size, remaining.size());
  for (size_t i = 0; i < batch; ++i) ep.batch.push_back(task.train[remaining[i]]);
  return ep;
}

}  // namespace

Encoder train_cluster_encoder(const std::vector<Task>& tasks, const TrainConfig& config,
                              std::uint64_t seed, std::vector<Scalar>* episode_losses) {
  config.validate();
  if (tasks.empty()) throw std::invalid_argument("train_cluster_encoder: empty cluster");
  const Index d = tasks[0].dim;
  for (const auto& task : tasks) {
    task.validate();
    if (task.dim != d)
      throw std::invalid_argument("train_cluster_encoder: tasks disagree on feature dim");
  }

  Encoder enc = init_encoder(d, config.embed_dim, derive_seed(seed, 0));

  auto held_out = [&](const Encoder& e) {
    Scalar total = 0;
    for (const auto& task : tasks)
      total += episode_loss(held_out_episode(task, config), e, config.head);
    return total / static_cast<Scalar>(tasks.size());
  };

  Encoder best = enc;
  Scalar best_loss = held_out(enc);
  std::uniform_int_distribution<size_t> pick_task(0, tasks.size() - 1);

  for (int step = 0; step < config.episodes; ++step) {
    auto engine = make_engine(derive_seed(seed, 1, static_cast<std::uint64_t>(step)));
    const Task& task = tasks[pick_task(engine)];
    const Episode ep = sample_episode(task, config, engine);
    if (ep.batch.empty()) continue;
    const auto [loss, grad] = episode_loss_and_gradient(ep, enc, config.head);
    if (episode_losses) episode_losses->push_back(loss);
    enc.weights -= config.episode_lr * grad;
    if ((step + 1) % config.eval_every == 0 || step + 1 == config.episodes) {
      const Scalar l = held_out(enc);
      if (l < best_loss) {
        best_loss = l;
        best = enc;
      }
    }
  }
  return best;
}

}  // namespace robusttc
