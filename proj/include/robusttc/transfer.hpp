#pragma once

#include "robusttc/encoder.hpp"
#include "robusttc/task.hpp"
#include "robusttc/types.hpp"

#include <cstdint>
#include <vector>

namespace robusttc {

/// Encoder plus a softmax classification head (logits = head * f(x) + bias).
struct SingleTaskModel {
  Encoder encoder;
  Matrix head;  // num_labels x embed_dim
  Vector bias;  // num_labels

  Vector predict(const Vector& x) const { return softmax(head * encoder.embed(x) + bias); }
};

/// Fraction of examples whose argmax prediction matches the label.
Scalar model_accuracy(const SingleTaskModel& model, const std::vector<LabeledExample>& split);

/// Joint full-batch gradient descent on encoder and head, cross-entropy
/// loss. The head starts at zero, the encoder at the seeded fan-in init.
SingleTaskModel train_single_task(const Task& task, const TrainConfig& config,
                                  std::uint64_t seed);

/// Freezes the source encoder, trains a fresh zero-initialized head on the
/// target's train split, and returns accuracy on the target's valid split.
Scalar transfer_score(const SingleTaskModel& source, const Task& target,
                      const TrainConfig& config);

/// Cross-task transfer matrix: entry (i,j) is transfer_score from task i's
/// encoder to task j. When budget < 1, unordered pairs are sampled uniformly
/// without replacement to ceil(budget * n(n-1)/2) and both directions of each
/// sampled pair are evaluated; everything else, including the diagonal, stays
/// unobserved.
PartialMatrix build_transfer_matrix(const std::vector<Task>& tasks, Scalar budget,
                                    std::uint64_t seed, const TrainConfig& config);

}  // namespace robusttc
