#pragma once

#include "robusttc/types.hpp"

namespace robusttc {

struct FilterParams {
  Scalar p1 = 0.5;
  Scalar p2 = 0.5;

  void validate() const;
};

/// Per-column mean and population standard deviation over observed
/// off-diagonal entries.
struct ColumnStats {
  Vector mu;
  Vector sigma;
};

/// Each column needs at least 2 observed off-diagonal entries.
ColumnStats column_stats(const PartialMatrix& s);

/// Maps the asymmetric score matrix S to a symmetric binary partial matrix:
/// a pair is similar (1) when both directions clear their column's upper
/// threshold mu + p1*sigma strictly, dissimilar (0) when both fall strictly
/// below mu - p2*sigma, and unobserved otherwise (including when either
/// direction of S is unobserved). The diagonal is observed with value 1.
PartialMatrix filter(const PartialMatrix& s, const FilterParams& params = {});

}  // namespace robusttc
