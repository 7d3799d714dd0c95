#include "aomcal/linalg.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace aomcal {

Matrix pseudo_inverse(const Matrix& a, double rel_cutoff, double* condition) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  double smallest = smax;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_cutoff * smax && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      smallest = sv(i);
    }
  }
  if (condition)
    *condition = smallest > 0.0 ? smax / smallest : std::numeric_limits<double>::infinity();
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

LeadingVector leading_left_singular_vector(const Matrix& s, double tol, int max_iter) {
  LeadingVector out;
  const Index q = s.cols();
  if (q == 1) {
    out.sigma = s.col(0).norm();
    out.vector = out.sigma > 0.0 ? Vector(s.col(0) / out.sigma) : Vector(Vector::Zero(s.rows()));
    return out;
  }
  const Matrix gram = s.transpose() * s;
  Index start = 0;
  gram.diagonal().maxCoeff(&start);
  Vector v = Vector::Zero(q);
  v(start) = 1.0;
  out.converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    Vector next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) break;
    next /= norm;
    out.iterations = it;
    const double change = (next - v).norm();
    v = std::move(next);
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    v = eig.eigenvectors().col(q - 1);
  }
  Vector r = s * v;
  out.sigma = r.norm();
  out.vector = out.sigma > 0.0 ? Vector(r / out.sigma) : Vector(Vector::Zero(s.rows()));
  return out;
}

}  // namespace aomcal
