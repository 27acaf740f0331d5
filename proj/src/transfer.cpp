#include "robusttc/transfer.hpp"

#include "robusttc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace robusttc {

namespace {

void check_task_dim(const Task& task, Index dim, const char* where) {
  if (task.dim != dim)
    throw std::invalid_argument(std::string(where) + ": task " + task.id +
                                " feature dim does not match encoder");
}

/// One full-batch gradient step on softmax cross-entropy. Returns the mean
/// loss at the current parameters and accumulates gradients.
struct HeadGradients {
  Matrix head;
  Vector bias;
  Matrix encoder;
};

Scalar cross_entropy_pass(const std::vector<LabeledExample>& split, const Encoder& enc,
                          const Matrix& head, const Vector& bias, HeadGradients* grads) {
  Scalar total = 0;
  const auto m = static_cast<Scalar>(split.size());
  for (const auto& ex : split) {
    const Vector fx = enc.embed(ex.features);
    const Vector p = softmax(head * fx + bias);
    total += -std::log(std::max(p(ex.label), 1e-12));
    if (grads) {
      Vector delta = p;
      delta(ex.label) -= 1.0;
      grads->head.noalias() += delta * fx.transpose() / m;
      grads->bias += delta / m;
      if (grads->encoder.size() > 0)
        grads->encoder.noalias() += (head.transpose() * delta) * ex.features.transpose() / m;
    }
  }
  return total / m;
}

}  // namespace

Scalar model_accuracy(const SingleTaskModel& model, const std::vector<LabeledExample>& split) {
  if (split.empty()) throw std::invalid_argument("model_accuracy: empty split");
  int correct = 0;
  for (const auto& ex : split)
    if (argmax(model.predict(ex.features)) == ex.label) ++correct;
  return static_cast<Scalar>(correct) / static_cast<Scalar>(split.size());
}

SingleTaskModel train_single_task(const Task& task, const TrainConfig& config,
                                  std::uint64_t seed) {
  config.validate();
  task.validate(false);
  if (task.train.empty())
    throw std::invalid_argument("train_single_task: task " + task.id + " has no train split");

  SingleTaskModel model;
  model.encoder = init_encoder(task.dim, config.embed_dim, seed);
  model.head = Matrix::Zero(task.num_labels, config.embed_dim);
  model.bias = Vector::Zero(task.num_labels);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    HeadGradients grads{Matrix::Zero(task.num_labels, config.embed_dim),
                        Vector::Zero(task.num_labels),
                        Matrix::Zero(config.embed_dim, task.dim)};
    cross_entropy_pass(task.train, model.encoder, model.head, model.bias, &grads);
    model.head -= config.lr * grads.head;
    model.bias -= config.lr * grads.bias;
    model.encoder.weights -= config.lr * grads.encoder;
  }
  return model;
}

Scalar transfer_score(const SingleTaskModel& source, const Task& target,
                      const TrainConfig& config) {
  config.validate();
  target.validate(true);
  check_task_dim(target, source.encoder.input_dim(), "transfer_score");

  Matrix head = Matrix::Zero(target.num_labels, source.encoder.embed_dim());
  Vector bias = Vector::Zero(target.num_labels);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    HeadGradients grads{Matrix::Zero(target.num_labels, source.encoder.embed_dim()),
                        Vector::Zero(target.num_labels), Matrix()};
    cross_entropy_pass(target.train, source.encoder, head, bias, &grads);
    head -= config.lr * grads.head;
    bias -= config.lr * grads.bias;
  }

  SingleTaskModel adapted{source.encoder, std::move(head), std::move(bias)};
  return model_accuracy(adapted, target.valid);
}

PartialMatrix build_transfer_matrix(const std::vector<Task>& tasks, Scalar budget,
                                    std::uint64_t seed, const TrainConfig& config) {
  const auto n = static_cast<Index>(tasks.size());
  if (n < 2) throw std::invalid_argument("build_transfer_matrix: need at least 2 tasks");
  if (budget <= 0.0 || budget > 1.0)
    throw std::invalid_argument("build_transfer_matrix: budget must lie in (0,1]");

  std::vector<SingleTaskModel> models;
  models.reserve(tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i)
    models.push_back(
        train_single_task(tasks[i], config, derive_seed(seed, 0, static_cast<std::uint64_t>(i))));

  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  auto engine = make_engine(derive_seed(seed, 1));
  std::shuffle(pairs.begin(), pairs.end(), engine);
  const auto keep =
      static_cast<size_t>(std::ceil(budget * static_cast<Scalar>(pairs.size())));
  pairs.resize(std::min(keep, pairs.size()));

  PartialMatrix s(n);
  for (const auto& [i, j] : pairs) {
    s.set(i, j, transfer_score(models[i], tasks[j], config));
    s.set(j, i, transfer_score(models[j], tasks[i], config));
  }
  return s;
}

}  // namespace robusttc
