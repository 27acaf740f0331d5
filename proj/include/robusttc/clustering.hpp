#pragma once

#include "robusttc/completion.hpp"
#include "robusttc/filter.hpp"
#include "robusttc/task.hpp"
#include "robusttc/transfer.hpp"
#include "robusttc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace robusttc {

namespace detail {

struct KMeansResult {
  Partition partition;
  Scalar inertia = 0.0;
  std::vector<Scalar> restart_inertias;
};

/// Lloyd's algorithm over the rows of `points`, best of `restarts` seeded
/// runs (greedy farthest-point seeding, ties and equidistant assignments
/// resolve to the lowest index). Every cluster in the result is nonempty.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 10,
                    int max_iters = 100);

}  // namespace detail

/// Clips entries to [0,1], symmetrizes, and sets the diagonal to 1, making
/// a completed similarity estimate safe for graph clustering.
Matrix preprocess_similarity(const Matrix& x);

/// Normalized spectral clustering: top-K eigenvectors of D^(-1/2) X D^(-1/2)
/// (the bottom of the symmetric normalized Laplacian), row-normalized, then
/// K-means. X must be symmetric within 1e-8; similarities are expected
/// nonnegative, and all-zero rows get degree 1e-12 to keep the normalization
/// defined.
Partition spectral_cluster(const Matrix& x, int k, std::uint64_t seed);

struct RobustTcParams {
  TrainConfig train;
  FilterParams filter_params;
  Scalar budget = 1.0;
  /// Solver settings; lambda <= 0 means use defaults for the matrix side.
  SolverConfig solver;
  /// When nonempty, intermediate artifacts (S, Y, X, E, diagnostics,
  /// partition) are written here.
  std::filesystem::path artifact_dir;
};

struct RobustTcResult {
  Partition partition;
  PartialMatrix transfer;
  PartialMatrix filtered;
  CompletionResult completion;
};

/// The full clustering pipeline: single-task training + transfer matrix,
/// score filtering, matrix completion, spectral clustering. Stage failures
/// rethrow with the stage named; a non-converged completion proceeds with a
/// warning on stderr.
RobustTcResult robust_tc(const std::vector<Task>& tasks, int k, const RobustTcParams& params,
                         std::uint64_t seed);

}  // namespace robusttc
