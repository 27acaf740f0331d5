#include "robusttc/filter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace robusttc {

void FilterParams::validate() const {
  if (p1 < 0 || p2 < 0)
    throw std::invalid_argument("filter params: p1 and p2 must be >= 0");
}

ColumnStats column_stats(const PartialMatrix& s) {
  const Index n = s.n();
  ColumnStats stats{Vector::Zero(n), Vector::Zero(n)};
  for (Index j = 0; j < n; ++j) {
    Scalar sum = 0, sum_sq = 0;
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      if (i == j || !s.mask(i, j)) continue;
      sum += s.values(i, j);
      sum_sq += s.values(i, j) * s.values(i, j);
      ++count;
    }
    if (count < 2)
      throw std::invalid_argument("column_stats: column " + std::to_string(j) +
                                  " has fewer than 2 observed off-diagonal entries");
    const Scalar mu = sum / static_cast<Scalar>(count);
    stats.mu(j) = mu;
    stats.sigma(j) = std::sqrt(std::max(sum_sq / static_cast<Scalar>(count) - mu * mu, 0.0));
  }
  return stats;
}

PartialMatrix filter(const PartialMatrix& s, const FilterParams& params) {
  params.validate();
  const auto stats = column_stats(s);
  const Index n = s.n();
  PartialMatrix y(n);
  for (Index i = 0; i < n; ++i) y.set(i, i, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (!s.mask(i, j) || !s.mask(j, i)) continue;
      const Scalar sij = s.values(i, j);
      const Scalar sji = s.values(j, i);
      const bool high = sij > stats.mu(j) + params.p1 * stats.sigma(j) &&
                        sji > stats.mu(i) + params.p1 * stats.sigma(i);
      const bool low = sij < stats.mu(j) - params.p2 * stats.sigma(j) &&
                       sji < stats.mu(i) - params.p2 * stats.sigma(i);
      if (high) {
        y.set(i, j, 1.0);
        y.set(j, i, 1.0);
      } else if (low) {
        y.set(i, j, 0.0);
        y.set(j, i, 0.0);
      }
    }
  }
  return y;
}

}  // namespace robusttc
