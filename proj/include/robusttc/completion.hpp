#pragma once

#include "robusttc/types.hpp"

namespace robusttc {

struct SolverConfig {
  Scalar lambda = 0.0;  // weight of the l1 term; must be set > 0
  Scalar rho = 1.0;     // augmented-Lagrangian penalty
  int max_iters = 2000;
  Scalar tol = 1e-7;  // relative feasibility tolerance
  bool symmetric = false;

  /// lambda = 1/sqrt(n), the usual robust-PCA scaling.
  static SolverConfig defaults(Index n);

  void validate() const;
};

struct CompletionResult {
  Matrix X;  // low-rank estimate
  Matrix E;  // sparse error estimate, supported on the observed set
  Scalar residual = 0.0;
  int iterations = 0;
  bool converged = false;
  Scalar objective = 0.0;  // ||X||_* + lambda ||E||_1
};

/// Solves  min ||X||_* + lambda ||E||_1  s.t.  P_Omega(X + E) = P_Omega(Y)
/// by ADMM on the splitting M = X + E, P_Omega(M) = P_Omega(Y), where M is
/// free on unobserved entries. Non-convergence within max_iters is reported
/// through the converged flag, not an exception.
CompletionResult complete(const PartialMatrix& y, const SolverConfig& config);

}  // namespace robusttc
