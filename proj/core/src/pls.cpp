#include "aomcal/pls.hpp"

#include <atomic>
#include <cmath>

#include "aomcal/error.hpp"
#include "aomcal/linalg.hpp"

namespace aomcal {

namespace {

std::atomic<std::uint64_t> g_extractions{0};

void check_finite(const Matrix& m, const char* what) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j)))
        throw DataError(std::string("non-finite value in ") + what + " at row " +
                        std::to_string(i) + ", column " + std::to_string(j));
}

// Gram-Schmidt of v against the orthonormal columns of basis, done twice.
Vector orthogonalise(const Matrix& basis, Index used, Vector v) {
  if (used == 0) return v;
  const auto b = basis.leftCols(used);
  for (int pass = 0; pass < 2; ++pass) v -= b * (b.transpose() * v);
  return v;
}

PlsFit empty_fit(const CenteredData& d, const LinOp& op, Index k) {
  PlsFit fit;
  fit.x_mean = d.x_mean;
  fit.y_mean = d.y_mean;
  fit.operator_name = op.name();
  fit.requested_components = k;
  fit.z = Matrix(d.channels(), 0);
  fit.x_loadings = Matrix(d.channels(), 0);
  fit.y_loadings = Matrix(d.responses(), 0);
  fit.t_norms = Vector(0);
  fit.coefficients = Matrix::Zero(d.channels(), d.responses());
  return fit;
}

void check_component_count(const CenteredData& d, Index k) {
  const Index cap = std::min(d.samples() - 1, d.channels());
  if (k < 1 || k > cap)
    throw ConfigError("component count " + std::to_string(k) + " outside [1, " +
                      std::to_string(cap) + "]");
}

void finish(PlsFit& fit, Index achieved) {
  fit.z.conservativeResize(Eigen::NoChange, achieved);
  fit.x_loadings.conservativeResize(Eigen::NoChange, achieved);
  fit.y_loadings.conservativeResize(Eigen::NoChange, achieved);
  fit.t_norms.conservativeResize(achieved);
  fit.n_components = achieved;
  if (achieved > 0)
    fit.coefficients =
        recover_coefficients(fit.z, fit.x_loadings, fit.y_loadings, &fit.pinv_condition);
}

}  // namespace

CenteredData center(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows())
    throw DimensionError("center: X has " + std::to_string(x.rows()) + " rows, Y has " +
                         std::to_string(y.rows()));
  if (x.rows() < 2) throw DataError("center: need at least 2 samples");
  check_finite(x, "X");
  check_finite(y, "Y");
  CenteredData d;
  d.x_mean = x.colwise().mean();
  d.y_mean = y.colwise().mean();
  d.xc = x.rowwise() - d.x_mean;
  d.yc = y.rowwise() - d.y_mean;
  return d;
}

Matrix cross_covariance(const CenteredData& d) { return d.xc.transpose() * d.yc; }

Matrix PlsFit::coefficients_for(Index k) const {
  if (k > n_components) throw ConfigError("coefficients_for: k exceeds fitted components");
  if (k == n_components) return coefficients;
  if (k == 0) return Matrix::Zero(z.rows(), y_loadings.rows());
  return recover_coefficients(z.leftCols(k), x_loadings.leftCols(k), y_loadings.leftCols(k));
}

PlsFit simpls_extract(const Matrix& s0, const CenteredData& d, const LinOp& op, Index k) {
  check_component_count(d, k);
  if (s0.rows() != d.channels() || s0.cols() != d.responses())
    throw DimensionError("simpls_extract: cross-covariance shape does not match data");
  g_extractions.fetch_add(1, std::memory_order_relaxed);

  PlsFit fit = empty_fit(d, op, k);
  Matrix sb = apply_forward(op, s0);
  const double s_norm0 = sb.norm();
  if (s_norm0 == 0.0) {
    fit.degenerate = true;
    return fit;
  }

  const Index p = d.channels();
  fit.z.resize(p, k);
  fit.x_loadings.resize(p, k);
  fit.y_loadings.resize(d.responses(), k);
  fit.t_norms.resize(k);
  Matrix basis(p, k);
  const double x_norm = d.xc.norm();

  Index a = 0;
  for (; a < k; ++a) {
    if (sb.norm() <= 1e-12 * s_norm0) break;
    const LeadingVector lead = leading_left_singular_vector(sb);
    const Vector z = apply_adjoint(op, lead.vector);
    Vector t = d.xc * z;
    const double tn = t.norm();
    if (tn <= 1e-12 * x_norm * z.norm() || tn == 0.0) break;
    t /= tn;
    const Vector pl = d.xc.transpose() * t;
    fit.z.col(a) = z;
    fit.x_loadings.col(a) = pl;
    fit.y_loadings.col(a) = d.yc.transpose() * t;
    fit.t_norms(a) = tn;

    const Vector mapped = apply_forward(op, pl);
    Vector v = orthogonalise(basis, a, mapped);
    const double vn = v.norm();
    if (vn <= 1e-12 * mapped.norm()) {
      ++a;
      break;
    }
    basis.col(a) = v / vn;
    sb -= basis.col(a) * (basis.col(a).transpose() * sb);
  }
  finish(fit, a);
  return fit;
}

PlsFit nipals_adjoint_extract(const CenteredData& d, const LinOp& op, Index k, int max_iter,
                              double tol) {
  check_component_count(d, k);
  g_extractions.fetch_add(1, std::memory_order_relaxed);

  PlsFit fit = empty_fit(d, op, k);
  if (apply_forward(op, cross_covariance(d)).norm() == 0.0) {
    fit.degenerate = true;
    return fit;
  }

  const Index p = d.channels();
  fit.z.resize(p, k);
  fit.x_loadings.resize(p, k);
  fit.y_loadings.resize(d.responses(), k);
  fit.t_norms.resize(k);
  Matrix e = d.xc;
  Matrix f = d.yc;
  const double x_norm = d.xc.norm();

  Index a = 0;
  for (; a < k; ++a) {
    Index ucol = 0;
    f.colwise().squaredNorm().maxCoeff(&ucol);
    Vector u = f.col(ucol);
    if (u.norm() == 0.0) break;

    Vector z, t, c;
    Vector t_old;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
      Vector w = apply_forward(op, Matrix(e.transpose() * u));
      const double wn = w.norm();
      if (wn == 0.0) break;
      w /= wn;
      z = apply_adjoint(op, w);
      t = e * z;
      const double tt = t.squaredNorm();
      if (tt == 0.0) break;
      c = f.transpose() * t / tt;
      if (f.cols() == 1 ||
          (t_old.size() && (t - t_old).norm() <= tol * t.norm())) {
        converged = true;
        break;
      }
      t_old = t;
      u = f * c / c.squaredNorm();
    }
    if (t.size() == 0 || t.norm() <= 1e-12 * x_norm * z.norm()) break;
    if (!converged)
      throw NumericError("NIPALS did not converge for component " + std::to_string(a + 1) +
                         " after " + std::to_string(max_iter) + " iterations");

    const double tt = t.squaredNorm();
    const Vector pl = e.transpose() * t / tt;
    e -= t * pl.transpose();
    f -= t * c.transpose();
    fit.z.col(a) = z;
    fit.x_loadings.col(a) = pl;
    fit.y_loadings.col(a) = c;
    fit.t_norms(a) = std::sqrt(tt);
  }
  finish(fit, a);
  return fit;
}

Matrix recover_coefficients(const Matrix& z, const Matrix& x_loadings, const Matrix& y_loadings,
                            double* condition) {
  if (z.cols() != x_loadings.cols() || z.cols() != y_loadings.cols() ||
      z.rows() != x_loadings.rows())
    throw DimensionError("recover_coefficients: inconsistent block shapes");
  const Matrix core = x_loadings.transpose() * z;
  return z * pseudo_inverse(core, 1e-10, condition) * y_loadings.transpose();
}

Matrix predict_linear(const Matrix& coefficients, const RowVector& x_mean,
                      const RowVector& y_mean, const Matrix& xnew) {
  if (xnew.cols() != coefficients.rows())
    throw DimensionError("predict: expected " + std::to_string(coefficients.rows()) +
                         " columns, got " + std::to_string(xnew.cols()));
  check_finite(xnew, "X");
  return ((xnew.rowwise() - x_mean) * coefficients).rowwise() + y_mean;
}

Matrix predict(const PlsFit& fit, const Matrix& xnew) {
  return predict_linear(fit.coefficients, fit.x_mean, fit.y_mean, xnew);
}

std::uint64_t pls_extraction_count() noexcept { return g_extractions.load(); }
void reset_pls_extraction_count() noexcept { g_extractions.store(0); }

}  // namespace aomcal
