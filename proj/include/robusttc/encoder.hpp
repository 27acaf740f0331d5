#pragma once

#include "robusttc/task.hpp"
#include "robusttc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace robusttc {

/// Linear embedding f(x) = W x defining the similarity metric
/// f(x1) . f(x2). No bias, no nonlinearity.
struct Encoder {
  Matrix weights;  // embed_dim x input_dim

  Index input_dim() const { return weights.cols(); }
  Index embed_dim() const { return weights.rows(); }
  Vector embed(const Vector& x) const { return weights * x; }
};

/// Entries uniform in [-1/sqrt(d), 1/sqrt(d)].
Encoder init_encoder(Index input_dim, Index embed_dim, std::uint64_t seed);

void save_encoder(const std::filesystem::path& path, const Encoder& enc);
Encoder load_encoder(const std::filesystem::path& path);

/// Labeled instances a metric predictor conditions on. Labels live in
/// [0, num_labels).
struct SupportSet {
  std::vector<LabeledExample> instances;
  int num_labels = 0;
};

SupportSet make_support(std::vector<LabeledExample> examples, int num_labels);

enum class PredictionHead { MNet, ProtoNet };

struct TrainConfig {
  // Kept below the union of cluster subspace dimensions so that a single
  // shared metric cannot cover diverse clusters at once.
  Index embed_dim = 6;

  // Full-batch gradient descent, used for single-task models and for
  // retraining softmax heads on a frozen encoder. Short head retraining
  // matters for transfer estimates: long retraining digs class structure
  // out of a foreign encoder's leakage and blurs the cluster signal.
  Scalar lr = 0.5;
  int epochs = 60;

  // Episodic metric training.
  Scalar episode_lr = 0.5;
  int episodes = 1000;
  int support_per_class = 2;
  int batch_size = 8;
  int eval_every = 25;
  PredictionHead head = PredictionHead::ProtoNet;

  void validate() const;
};

/// Numerically stable softmax.
Vector softmax(const Vector& scores);

/// Index of the largest entry; ties resolve to the lowest index.
int argmax(const Vector& v);

/// Attention over individual support instances: alpha = softmax of
/// f(x) . f(x_i), aggregated into label probabilities through the
/// instances' one-hot labels.
Vector mnet_predict(const Vector& x, const SupportSet& support, const Encoder& enc);

/// Softmax over per-class sums of embedded support instances. Every class
/// must have at least one support instance.
Vector protonet_predict(const Vector& x, const SupportSet& support, const Encoder& enc);

/// Support plus a query batch disjoint from it, drawn from one task.
struct Episode {
  SupportSet support;
  std::vector<LabeledExample> batch;
};

/// Mean negative log-probability of the true label over the batch, with the
/// probability floored at 1e-12 inside the log.
Scalar episode_loss(const Episode& episode, const Encoder& enc,
                    PredictionHead head = PredictionHead::MNet);

/// Loss together with its analytic gradient w.r.t. the encoder weights.
std::pair<Scalar, Matrix> episode_loss_and_gradient(
    const Episode& episode, const Encoder& enc,
    PredictionHead head = PredictionHead::MNet);

/// Episodic gradient descent over episodes sampled uniformly across the
/// given tasks; returns the snapshot with the best held-out loss (support
/// drawn from train, queries from the valid split). Deterministic in seed.
/// When episode_losses is given it receives the pre-update loss of every
/// sampled episode, in order.
Encoder train_cluster_encoder(const std::vector<Task>& tasks, const TrainConfig& config,
                              std::uint64_t seed,
                              std::vector<Scalar>* episode_losses = nullptr);

}  // namespace robusttc
