#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace robusttc {

/// Entrywise shrinkage: the proximal operator of tau * ||.||_1.
/// Each entry maps to sign(m) * max(|m| - tau, 0).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
soft_threshold(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (tau < Scalar(0))
    throw std::invalid_argument("soft_threshold: tau must be nonnegative");
  auto a = m.derived().array();
  return (a.abs() - tau).max(Scalar(0)) * a.sign();
}

/// Singular value thresholding: the proximal operator of tau * ||.||_*.
/// Returns U diag(max(sigma_i - tau, 0)) V^T, the minimizer of
/// tau ||X||_* + 1/2 ||X - M||_F^2.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
svt(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (tau < Scalar(0))
    throw std::invalid_argument("svt: tau must be nonnegative");
  if (!m.allFinite())
    throw std::runtime_error("svt: non-finite input");
  if (tau == Scalar(0)) return m.derived();
  Eigen::BDCSVD<Mat> svd(m.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::Vector<Scalar, Eigen::Dynamic> sigma =
      (svd.singularValues().array() - tau).max(Scalar(0));
  return svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
}

/// Singular value thresholding specialized to symmetric input. For
/// A = Q diag(w) Q^T the singular values are |w| with left/right vectors
/// differing only by sign(w), so the shrunk matrix is
/// Q diag(sign(w) * max(|w| - tau, 0)) Q^T. One self-adjoint
/// eigendecomposition instead of a full SVD; several times faster and the
/// output is symmetric by construction. Only the lower triangle of m is read.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
svt_symmetric(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols())
    throw std::invalid_argument("svt_symmetric: matrix must be square");
  if (tau < Scalar(0))
    throw std::invalid_argument("svt_symmetric: tau must be nonnegative");
  if (!m.allFinite())
    throw std::runtime_error("svt_symmetric: non-finite input");
  Eigen::SelfAdjointEigenSolver<Mat> eig(m.derived());
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("svt_symmetric: eigendecomposition failed");
  Eigen::Vector<Scalar, Eigen::Dynamic> w = eig.eigenvalues();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const Scalar shrunk = std::max(std::abs(w[i]) - tau, Scalar(0));
    w[i] = w[i] < Scalar(0) ? -shrunk : shrunk;
  }
  const Mat& q = eig.eigenvectors();
  Mat out = q * w.asDiagonal() * q.transpose();
  out = ((out + out.transpose()) / Scalar(2)).eval();
  return out;
}

/// Sum of singular values.
template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!m.allFinite())
    throw std::runtime_error("nuclear_norm: non-finite input");
  Eigen::BDCSVD<Mat> svd(m.derived());
  return svd.singularValues().sum();
}

}  // namespace robusttc
