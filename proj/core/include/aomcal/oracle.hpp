#pragma once

// Materialised reference paths. Everything here forms X A^T explicitly and
// runs textbook PLS or ridge on it; the fast folded paths are checked against
// these routes by the equivalence suite.

#include <cstdint>
#include <string>
#include <vector>

#include "aomcal/aom_pls.hpp"
#include "aomcal/operators.hpp"
#include "aomcal/stats.hpp"

namespace aomcal {

struct ReferenceFit {
  Matrix coefficients;  // on the transformed columns of Xt
  RowVector x_mean;
  RowVector y_mean;
  Index n_components = 0;

  Matrix predict(const Matrix& xt_new) const;
};

/// SIMPLS on an explicit matrix: directions from a full SVD of the deflated
/// cross-covariance, B = R Q^T with unit-norm scores.
ReferenceFit reference_pls(const Matrix& xt, const Matrix& y, Index k);

/// NIPALS PLS2 on an explicit matrix, B = W (P^T W)^-1 C^T.
ReferenceFit reference_nipals(const Matrix& xt, const Matrix& y, Index k);

/// Primal ridge (Xt^T Xt + alpha I)^-1 Xt^T Yc.
ReferenceFit reference_ridge(const Matrix& xt, const Matrix& y, double alpha);

struct PlainCvResult {
  Matrix coefficients;
  RowVector x_mean;
  RowVector y_mean;
  Index components = 0;  // plain PLS only
  double alpha = 0;      // plain ridge only
  std::vector<double> cv;  // mean held-out RMSE per K or per alpha
};

/// Operator-free CV-PLS: K chosen by mean held-out RMSE, ties to the lower K.
PlainCvResult plain_cv_pls(const Matrix& x, const Matrix& y, int k_max, const FoldPlan& plan);

/// Operator-free CV dual ridge over an alpha grid.
PlainCvResult plain_cv_ridge(const Matrix& x, const Matrix& y, const std::vector<double>& alphas,
                             const FoldPlan& plan);

struct ExplicitGridResult {
  std::size_t chosen_operator = 0;
  int chosen_components = 0;
  std::uint64_t extractions = 0;
  Matrix cv;  // operators x k_max mean held-out RMSE (NaN where unavailable)
};

/// Grid emulation: materialise X A_b^T per operator and fit every
/// (operator, K, fold) cell separately with reference_pls.
ExplicitGridResult explicit_grid_select(const Matrix& x, const Matrix& y, const OperatorBank& bank,
                                        int k_max, const FoldPlan& plan);

struct EquivalenceRow {
  std::string check;
  int config = 0;
  Index n = 0, p = 0, q = 0;
  double discrepancy = 0;
  double threshold = 0;
  bool pass = true;
};

struct EquivalenceReport {
  std::vector<EquivalenceRow> rows;
  double seconds = 0;

  bool passed() const;
  /// Largest discrepancy of one check family.
  double max_discrepancy(const std::string& check) const;
  std::string text() const;
  std::string csv() const;
};

/// Check family names as they appear in reports.
inline constexpr const char* kCheckIdentity = "cross_covariance_identity";
inline constexpr const char* kCheckNipals = "simpls_vs_nipals_rmsep";
inline constexpr const char* kCheckFolded = "folded_vs_materialised";
inline constexpr const char* kCheckRidge = "ridge_dual_vs_primal";

inline constexpr double kIdentityThreshold = 1e-10;
inline constexpr double kNipalsThreshold = 1e-9;
inline constexpr double kFoldedThreshold = 1e-6;
inline constexpr double kRidgeThreshold = 1e-8;

/// Runs the four check families on `configs` random (n, p, q) draws with
/// n in [20, 200] and p in [30, 400], over every compact-bank operator.
/// Discrepancies are max-abs differences relative to max(1, max-abs reference).
EquivalenceReport equivalence_suite(std::uint64_t seed, int configs = 20, int threads = 1);

}  // namespace aomcal
