#include "robusttc/completion.hpp"

#include "robusttc/prox.hpp"

#include <cmath>
#include <stdexcept>

namespace robusttc {

SolverConfig SolverConfig::defaults(Index n) {
  SolverConfig c;
  c.lambda = 1.0 / std::sqrt(static_cast<Scalar>(n));
  return c;
}

void SolverConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("SolverConfig: lambda must be positive");
  if (!(rho > 0.0)) throw std::invalid_argument("SolverConfig: rho must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be at least 1");
}

CompletionResult complete(const PartialMatrix& y, const SolverConfig& config) {
  config.validate();
  const Index n = y.n();
  if (y.observed_count() == 0) throw std::invalid_argument("complete: empty observation set");
  if (config.symmetric && !y.is_symmetric())
    throw std::invalid_argument("complete: input tagged symmetric is not symmetric");
  if (!y.values.allFinite()) throw std::runtime_error("complete: non-finite input");

  const Matrix omega = y.mask.cast<Scalar>();
  const Matrix off_omega = Matrix::Ones(n, n) - omega;
  const Matrix& y_obs = y.values;  // zero off the observed set by convention
  const Scalar y_norm = std::max(1.0, y_obs.norm());
  const Scalar rho = config.rho;

  Matrix x = Matrix::Zero(n, n);
  Matrix e = Matrix::Zero(n, n);
  Matrix dual = Matrix::Zero(n, n);
  Matrix m = y_obs;
  Matrix m_prev(n, n);

  CompletionResult result;
  for (int it = 1; it <= config.max_iters; ++it) {
    const Matrix target = m - e + dual / rho;
    x = config.symmetric ? svt_symmetric(((target + target.transpose()) / 2.0).eval(), 1.0 / rho)
                         : svt(target, 1.0 / rho);

    e = soft_threshold(m - x + dual / rho, config.lambda / rho).cwiseProduct(omega);

    m_prev = m;
    m = y_obs + off_omega.cwiseProduct(x + e - dual / rho);

    dual += rho * (m - x - e);

    result.iterations = it;
    result.residual = omega.cwiseProduct(x + e - y_obs).norm() / y_norm;
    // Feasibility alone can dip under tol while the splitting variables are
    // still moving, so require the consensus update to have settled as well.
    const Scalar dual_shift = rho * (m - m_prev).norm() / y_norm;
    if (result.residual <= config.tol && dual_shift <= config.tol) {
      result.converged = true;
      break;
    }
  }

  result.X = std::move(x);
  result.E = std::move(e);
  result.objective = nuclear_norm(result.X) + config.lambda * result.E.lpNorm<1>();
  return result;
}

}  // namespace robusttc
