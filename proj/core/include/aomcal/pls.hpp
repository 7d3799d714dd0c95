#pragma once

// Partial least squares driven by the cross-covariance S = Xc^T Yc.
//
// A strict-linear operator A enters only through S_b = A S and the adjoint
// map z = A^T r, so every fit is expressed on the original wavelength grid.

#include <cstdint>
#include <string>

#include "aomcal/operators.hpp"
#include "aomcal/types.hpp"

namespace aomcal {

struct CenteredData {
  Matrix xc;  // n x p
  Matrix yc;  // n x q
  RowVector x_mean;
  RowVector y_mean;

  Index samples() const noexcept { return xc.rows(); }
  Index channels() const noexcept { return xc.cols(); }
  Index responses() const noexcept { return yc.cols(); }
};

/// Column-mean centering. Throws DataError naming the first non-finite cell.
CenteredData center(const Matrix& x, const Matrix& y);

/// S = Xc^T Yc (p x q).
Matrix cross_covariance(const CenteredData& d);

struct PlsFit {
  Matrix z;             // p x K original-grid weights
  Matrix x_loadings;    // p x K
  Matrix y_loadings;    // q x K
  Vector t_norms;       // K score norms before normalisation
  Matrix coefficients;  // p x q
  RowVector x_mean;
  RowVector y_mean;
  int operator_id = 0;
  std::string operator_name = "identity";
  Index n_components = 0;
  Index requested_components = 0;
  bool degenerate = false;     // S was zero; coefficients are zero
  double pinv_condition = 1.0;

  /// Coefficients using only the first k components (k <= n_components).
  Matrix coefficients_for(Index k) const;
};

/// Folded SIMPLS on S_b = A S0. Per component: r = leading left singular
/// vector of S_b, z = A^T r, t = Xc z (normalised), p = Xc^T t, q = Yc^T t;
/// S_b is then deflated against the orthonormalised operator-mapped loadings
/// A p_1..A p_a, which are the loadings of the transformed spectra Xc A^T.
/// Stops early (recording the achieved K) once the numerical rank is exhausted.
PlsFit simpls_extract(const Matrix& s0, const CenteredData& d, const LinOp& op, Index k);

/// NIPALS on Xc A^T without forming the transformed matrix: residual
/// deflation happens on Xc, the operator only acts on p-vectors.
/// Throws NumericError naming the component that fails to converge.
PlsFit nipals_adjoint_extract(const CenteredData& d, const LinOp& op, Index k,
                              int max_iter = 500, double tol = 1e-12);

/// B = Z (P^T Z)^+ Q^T.
Matrix recover_coefficients(const Matrix& z, const Matrix& x_loadings, const Matrix& y_loadings,
                            double* condition = nullptr);

/// (Xnew - x_mean) B + y_mean on raw spectra.
Matrix predict(const PlsFit& fit, const Matrix& xnew);

/// Shared linear deployment step for every calibration in the library.
Matrix predict_linear(const Matrix& coefficients, const RowVector& x_mean,
                      const RowVector& y_mean, const Matrix& xnew);

/// Process-wide count of PLS extractions (SIMPLS or NIPALS) since the last reset.
std::uint64_t pls_extraction_count() noexcept;
void reset_pls_extraction_count() noexcept;

}  // namespace aomcal
