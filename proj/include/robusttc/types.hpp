#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace robusttc {

using Index = Eigen::Index;
using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A square matrix with an observation mask. Unobserved values are stored
/// as 0 and must be ignored by every consumer.
struct PartialMatrix {
  Matrix values;
  BoolMatrix mask;

  PartialMatrix() = default;
  explicit PartialMatrix(Index n)
      : values(Matrix::Zero(n, n)), mask(BoolMatrix::Constant(n, n, false)) {}
  PartialMatrix(Matrix v, BoolMatrix m)
      : values(std::move(v)), mask(std::move(m)) {
    if (values.rows() != values.cols() || mask.rows() != values.rows() ||
        mask.cols() != values.cols()) {
      throw std::invalid_argument("PartialMatrix: shapes must be square and agree");
    }
  }

  Index n() const { return values.rows(); }

  Index observed_count() const { return mask.cast<Index>().sum(); }

  void set(Index i, Index j, Scalar v) {
    values(i, j) = v;
    mask(i, j) = true;
  }

  void unset(Index i, Index j) {
    values(i, j) = 0.0;
    mask(i, j) = false;
  }

  bool is_symmetric() const {
    for (Index j = 0; j < n(); ++j)
      for (Index i = 0; i < j; ++i)
        if (mask(i, j) != mask(j, i) ||
            (mask(i, j) && values(i, j) != values(j, i)))
          return false;
    return true;
  }
};

/// Assignment of n items to cluster ids 0..K-1; every id occurs at least once.
struct Partition {
  std::vector<int> assignments;
  int num_clusters = 0;

  Partition() = default;
  Partition(std::vector<int> a, int k) : assignments(std::move(a)), num_clusters(k) {
    validate();
  }

  Index size() const { return static_cast<Index>(assignments.size()); }

  void validate() const {
    if (num_clusters < 1)
      throw std::invalid_argument("Partition: need at least one cluster");
    if (static_cast<Index>(assignments.size()) < num_clusters)
      throw std::invalid_argument("Partition: more clusters than items");
    std::vector<bool> seen(num_clusters, false);
    for (int a : assignments) {
      if (a < 0 || a >= num_clusters)
        throw std::invalid_argument("Partition: cluster id out of range");
      seen[a] = true;
    }
    for (bool s : seen)
      if (!s) throw std::invalid_argument("Partition: empty cluster");
  }

  /// Item indices belonging to cluster k, in increasing order.
  std::vector<Index> members(int k) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (assignments[i] == k) out.push_back(i);
    return out;
  }

  /// Membership-matrix form: X_ij = 1 iff i and j share a cluster.
  Matrix block_matrix() const {
    const Index n = size();
    Matrix x = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        x(i, j) = assignments[i] == assignments[j] ? 1.0 : 0.0;
    return x;
  }
};

/// True when p and q induce the same grouping, ignoring cluster labels.
inline bool same_partition(const Partition& p, const Partition& q) {
  if (p.size() != q.size()) return false;
  const Index n = p.size();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if ((p.assignments[i] == p.assignments[j]) !=
          (q.assignments[i] == q.assignments[j]))
        return false;
  return true;
}

}  // namespace robusttc
