#pragma once

#include "aomcal/types.hpp"

namespace aomcal {

/// Moore-Penrose pseudoinverse; singular values below rel_cutoff * max are zeroed.
/// `condition` receives max / smallest retained singular value.
Matrix pseudo_inverse(const Matrix& a, double rel_cutoff = 1e-10, double* condition = nullptr);

struct LeadingVector {
  Vector vector;      // unit left singular vector
  double sigma = 0;   // leading singular value
  int iterations = 0;
  bool converged = true;
};

/// Leading left singular vector of a thin p x q matrix (q small).
///
/// Power iteration on the q x q Gram S^T S (equivalently on S S^T applied as
/// two thin products), tolerance 1e-12, at most 500 iterations, started from
/// the column of S with the largest norm. Falls back to a dense symmetric
/// eigensolve of the Gram when the iteration stalls on a small spectral gap.
LeadingVector leading_left_singular_vector(const Matrix& s, double tol = 1e-12,
                                           int max_iter = 500);

}  // namespace aomcal
