#include "robusttc/clustering.hpp"

#include "robusttc/io.hpp"
#include "robusttc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

namespace robusttc {

namespace detail {

namespace {

std::vector<int> assign_points(const Matrix& points, const Matrix& centers) {
  const Index n = points.rows();
  const Index k = centers.rows();
  std::vector<int> assignment(n, 0);
  for (Index i = 0; i < n; ++i) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < k; ++c) {
      const Scalar d = (points.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        assignment[i] = static_cast<int>(c);
      }
    }
  }
  return assignment;
}

Matrix seed_centers(const Matrix& points, int k, std::mt19937_64& engine) {
  const Index n = points.rows();
  Matrix centers(k, points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(engine));
  Vector dist_sq(n);
  for (Index i = 0; i < n; ++i)
    dist_sq(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    Index far = 0;
    for (Index i = 1; i < n; ++i)
      if (dist_sq(i) > dist_sq(far)) far = i;
    centers.row(c) = points.row(far);
    for (Index i = 0; i < n; ++i)
      dist_sq(i) = std::min(dist_sq(i), (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts,
                    int max_iters) {
  const Index n = points.rows();
  if (k < 1 || static_cast<Index>(k) > n)
    throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");

  KMeansResult best;
  best.inertia = std::numeric_limits<Scalar>::infinity();

  for (int r = 0; r < restarts; ++r) {
    auto engine = make_engine(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Matrix centers = seed_centers(points, k, engine);
    std::vector<int> assignment = assign_points(points, centers);

    for (int iter = 0; iter < max_iters; ++iter) {
      centers.setZero();
      std::vector<Index> counts(k, 0);
      for (Index i = 0; i < n; ++i) {
        centers.row(assignment[i]) += points.row(i);
        ++counts[assignment[i]];
      }
      for (int c = 0; c < k; ++c)
        if (counts[c] > 0) centers.row(c) /= static_cast<Scalar>(counts[c]);

      // Empty-cluster repair: seize the point farthest from its center.
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        Index far = 0;
        Scalar far_dist = -1;
        for (Index i = 0; i < n; ++i) {
          if (counts[assignment[i]] <= 1) continue;
          const Scalar d = (points.row(i) - centers.row(assignment[i])).squaredNorm();
          if (d > far_dist) {
            far_dist = d;
            far = i;
          }
        }
        --counts[assignment[far]];
        assignment[far] = c;
        counts[c] = 1;
        centers.row(c) = points.row(far);
      }

      auto next = assign_points(points, centers);
      if (next == assignment) break;
      assignment = std::move(next);
    }

    Scalar inertia = 0;
    std::vector<Index> counts(k, 0);
    centers.setZero();
    for (Index i = 0; i < n; ++i) {
      centers.row(assignment[i]) += points.row(i);
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) centers.row(c) /= static_cast<Scalar>(counts[c]);
    for (Index i = 0; i < n; ++i)
      inertia += (points.row(i) - centers.row(assignment[i])).squaredNorm();

    best.restart_inertias.push_back(inertia);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.partition = Partition(assignment, k);
    }
  }
  return best;
}

}  // namespace detail

Matrix preprocess_similarity(const Matrix& x) {
  if (x.rows() != x.cols())
    throw std::invalid_argument("preprocess_similarity: matrix must be square");
  Matrix out = x.cwiseMax(0.0).cwiseMin(1.0);
  out = ((out + out.transpose()) / 2.0).eval();
  out.diagonal().setOnes();
  return out;
}

Partition spectral_cluster(const Matrix& x, int k, std::uint64_t seed) {
  const Index n = x.rows();
  if (x.cols() != n) throw std::invalid_argument("spectral_cluster: matrix must be square");
  if (k < 1 || static_cast<Index>(k) > n)
    throw std::invalid_argument("spectral_cluster: need 1 <= K <= n");
  if ((x - x.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("spectral_cluster: matrix must be symmetric");

  Vector degree = x.rowwise().sum();
  for (Index i = 0; i < n; ++i) degree(i) = std::max(degree(i), 1e-12);
  const Vector d_inv_sqrt = degree.array().rsqrt().matrix();
  const Matrix normalized = d_inv_sqrt.asDiagonal() * x * d_inv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(((normalized + normalized.transpose()) / 2.0).eval());
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("spectral_cluster: eigendecomposition failed");
  Matrix embedding = eig.eigenvectors().rightCols(k);

  for (Index i = 0; i < n; ++i) {
    const Scalar norm = embedding.row(i).norm();
    if (norm > 0) embedding.row(i) /= norm;
  }

  return detail::kmeans(embedding, k, seed).partition;
}

namespace {

template <typename F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("robust_tc stage ") + stage + ": " + e.what());
  }
}

}  // namespace

RobustTcResult robust_tc(const std::vector<Task>& tasks, int k, const RobustTcParams& params,
                         std::uint64_t seed) {
  const auto n = static_cast<Index>(tasks.size());
  if (k < 1 || static_cast<Index>(k) > n)
    throw std::invalid_argument("robust_tc: need 1 <= K <= number of tasks");

  RobustTcResult result;
  result.transfer = run_stage("transfer", [&] {
    return build_transfer_matrix(tasks, params.budget, derive_seed(seed, 0), params.train);
  });
  result.filtered =
      run_stage("filter", [&] { return filter(result.transfer, params.filter_params); });

  result.completion = run_stage("completion", [&] {
    SolverConfig config = params.solver;
    if (config.lambda <= 0) {
      config = SolverConfig::defaults(n);
      // With few observed pairs the L1 term can absorb every observed entry
      // more cheaply than any nonzero X, collapsing the completion to zero.
      // Scale the penalty by the observed fraction to keep the two terms
      // balanced, matching the rule used by the recovery sweep.
      const Scalar frac = static_cast<Scalar>(result.filtered.observed_count()) /
                          (static_cast<Scalar>(n) * static_cast<Scalar>(n));
      if (frac > 0) config.lambda = 1.4 / std::sqrt(frac * static_cast<Scalar>(n));
    }
    config.symmetric = true;
    return complete(result.filtered, config);
  });
  if (!result.completion.converged)
    std::cerr << "robust_tc: completion did not converge within its iteration budget "
                 "(residual "
              << result.completion.residual << "); proceeding\n";

  result.partition = run_stage("clustering", [&] {
    return spectral_cluster(preprocess_similarity(result.completion.X), k,
                            derive_seed(seed, 1));
  });

  if (!params.artifact_dir.empty()) {
    run_stage("artifacts", [&] {
      const auto& dir = params.artifact_dir;
      std::filesystem::create_directories(dir);
      write_partial_matrix_csv(dir / "S.csv", result.transfer);
      write_partial_matrix_csv(dir / "Y.csv", result.filtered);
      write_matrix_csv(dir / "X.csv", result.completion.X);
      write_matrix_csv(dir / "E.csv", result.completion.E);
      write_diagnostics_json(dir / "diagnostics.json", result.completion);
      std::vector<std::string> ids;
      for (const auto& task : tasks) ids.push_back(task.id);
      write_partition_csv(dir / "partition.csv", result.partition, ids);
      return 0;
    });
  }
  return result;
}

}  // namespace robusttc
