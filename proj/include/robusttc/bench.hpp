#pragma once

#include "robusttc/task.hpp"
#include "robusttc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace robusttc {

/// A planted clustering instance: the ground-truth block matrix, the
/// partition behind it, and (after observe_and_corrupt) the observed
/// entries plus the set of flipped positions.
struct PlantedMatrixInstance {
  Matrix x_star;
  Partition partition;
  PartialMatrix observed;
  std::vector<std::pair<Index, Index>> corrupted;  // unordered, i < j
};

/// Balanced-as-possible random partition of n items into k_star clusters,
/// together with its block matrix (rank exactly k_star).
PlantedMatrixInstance planted_partition_matrix(Index n, int k_star, std::uint64_t seed);

/// Samples ceil(observe_frac * n(n-1)/2) unordered off-diagonal positions,
/// marks them observed in both triangles, then flips ceil(corrupt_frac * that)
/// of them 0 <-> 1, again symmetrically. The diagonal is always observed with
/// value 1. Fills inst.observed and inst.corrupted and returns the observed
/// matrix.
PartialMatrix observe_and_corrupt(PlantedMatrixInstance& inst, Scalar observe_frac,
                                  Scalar corrupt_frac, std::uint64_t seed);

/// Adjusted Rand Index between two partitions of the same items, via
/// pair counting with the expected-index correction. Range [-1, 1].
Scalar ari(const Partition& p, const Partition& q);

struct TaskSuiteSpec {
  int num_clusters = 2;
  int tasks_per_cluster = 10;
  // Label counts close to subspace_dim make each task's discriminative
  // directions span most of its cluster subspace, so within-cluster transfer
  // stays high while cross-cluster transfer drops to chance.
  int min_labels_per_task = 4;
  int max_labels_per_task = 6;
  int instances_per_label = 60;
  Index ambient_dim = 64;
  Index subspace_dim = 6;
  Scalar noise_scale = 0.8;
  int num_targets = 6;
  int target_shots = 5;
  int target_queries_per_label = 20;
  bool include_novel_target = false;
  // The novel target gets a fixed, larger label count so that chance-level
  // accuracy on it sits clearly below the adaptive fallback threshold.
  int novel_target_labels = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A generated benchmark suite: meta-training tasks with their ground-truth
/// cluster partition, plus few-shot target tasks (train = support set,
/// empty valid, test = queries). When include_novel_target is set, one extra
/// target drawn from a fresh subspace orthogonal to every cluster is
/// appended, marked -1 in target_true_cluster.
struct TaskSuite {
  std::vector<Task> tasks;
  Partition ground_truth;
  std::vector<Task> targets;
  std::vector<int> target_true_cluster;
};

/// Builds pairwise-orthogonal cluster subspaces (blocks of an orthonormal
/// basis), samples class prototypes inside each cluster's subspace and
/// Gaussian instances around them, and splits each task 64/16/20 into
/// train/valid/test, stratified by label. Label counts vary per task within
/// [min_labels_per_task, max_labels_per_task]. Bit-deterministic in the seed.
TaskSuite generate_task_suite(const TaskSuiteSpec& spec);

struct SweepCell {
  Scalar observe_frac = 0.0;
  Scalar corrupt_frac = 0.0;
  int trials = 0;
  Scalar recovery_rate = 0.0;
  Scalar mean_iterations = 0.0;
};

/// For each (observe_frac, corrupt_frac) grid cell, plants `trials` fresh
/// instances, runs the completion solver, and counts exact recoveries
/// (entrywise deviation from the planted matrix below 1e-3). Each trial uses
/// a child seed derived from (cell index, trial index), so results do not
/// depend on execution order.
std::vector<SweepCell> recovery_sweep(Index n, int k_star,
                                      const std::vector<Scalar>& observe_grid,
                                      const std::vector<Scalar>& corrupt_grid,
                                      int trials, std::uint64_t seed);

/// CSV with columns observe_frac,corrupt_frac,trials,recovery_rate,mean_iterations.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepCell>& cells);

}  // namespace robusttc
