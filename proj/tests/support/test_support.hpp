#pragma once

#include <algorithm>
#include <cmath>

#include "aomcal/rng.hpp"
#include "aomcal/types.hpp"

namespace aomcal::testing {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  return random_matrix(rows, cols, rng);
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return max_abs(a - b); }

/// Max-abs difference scaled by the reference magnitude (floored at 1).
inline double rel_diff(const Matrix& got, const Matrix& ref) {
  return max_abs(got - ref) / std::max(1.0, max_abs(ref));
}

}  // namespace aomcal::testing
