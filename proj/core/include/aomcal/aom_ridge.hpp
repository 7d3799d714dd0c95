#pragma once

// Dual ridge with operator-induced kernels K_b = (Xc A_b^T)(Xc A_b^T)^T.
// Coefficients are recovered on the original grid as A_b^T A_b Xc^T C.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aomcal/operators.hpp"
#include "aomcal/pls.hpp"
#include "aomcal/stats.hpp"

namespace aomcal {

/// 50 log-spaced values over [1e-6, 1e3].
std::vector<double> default_alpha_grid();

/// W W^T with W = apply_rows(op, Xc).
Matrix operator_kernel(const CenteredData& d, const LinOp& op);

/// Solves (K + alpha I) C = Yc by Cholesky. Throws NumericError on failure.
Matrix dual_solve(const Matrix& k, double alpha, const Matrix& yc);

/// Eigendecomposition of a kernel, reused across an alpha sweep.
struct KernelEigen {
  Vector values;
  Matrix vectors;
  Matrix projected;  // vectors^T Yc

  KernelEigen(const Matrix& k, const Matrix& yc);
  /// (K + alpha I)^-1 Yc.
  Matrix dual(double alpha) const;
};

/// A^T (A (Xc^T C)).
Matrix ridge_coefficients(const LinOp& op, const CenteredData& d, const Matrix& dual);

struct MixtureKernel {
  Matrix kernel;
  std::vector<double> scales;
  /// C -> sum_b s_b^2 A_b^T A_b Xc^T C.
  std::function<Matrix(const Matrix&)> recover;
};

/// s_b = 1 / rms(Xc A_b^T), so every scaled block has Frobenius norm sqrt(n p).
std::vector<double> default_mixture_scales(const CenteredData& d, const std::vector<LinOp>& ops);

/// K = sum_b s_b^2 K_b. Empty scales select the defaults. Throws ConfigError on
/// negative or all-zero scales.
MixtureKernel mixture_kernel(const CenteredData& d, const std::vector<LinOp>& ops,
                             std::vector<double> scales = {});

/// Held-out RMSE per (fold, candidate, alpha index).
class RidgeTable {
public:
  RidgeTable() = default;
  RidgeTable(std::vector<std::string> candidate_names, std::vector<double> alphas, int folds);

  std::size_t candidates() const noexcept { return names_.size(); }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  int folds() const noexcept { return folds_; }
  std::size_t cells() const noexcept { return names_.size() * alphas_.size(); }

  double fold_value(int fold, std::size_t candidate, std::size_t alpha) const;
  void set_fold_value(int fold, std::size_t candidate, std::size_t alpha, double v);
  double value(std::size_t candidate, std::size_t alpha) const;

  /// Argmin of the mean; ties go to the lower candidate, then the lower alpha index.
  void choose();
  std::size_t chosen_candidate() const noexcept { return chosen_c_; }
  std::size_t chosen_alpha_index() const noexcept { return chosen_a_; }
  double chosen_alpha() const { return alphas_.at(chosen_a_); }

  /// Columns candidate,alpha,fold,rmse; per-fold rows then fold=mean rows.
  std::string to_csv() const;
  bool operator==(const RidgeTable& other) const;

private:
  std::vector<std::string> names_;
  std::vector<double> alphas_;
  int folds_ = 0;
  std::vector<double> values_;
  std::size_t chosen_c_ = 0;
  std::size_t chosen_a_ = 0;
};

struct RidgeConfig {
  OperatorBank bank;
  std::vector<double> alphas = default_alpha_grid();
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RidgeFit {
  Matrix beta;  // p x q
  double alpha = 0;
  int operator_id = 0;  // -1 for a mixture
  std::string operator_name = "identity";
  std::vector<double> scales;  // mixture block scales s_b; empty for a single operator
  RowVector x_mean;
  RowVector y_mean;
  Matrix dual;  // n x q training dual coefficients C
  RidgeTable table;
};

/// Grid over (operator, alpha) with one eigendecomposition per (fold, operator),
/// then a full-data refit with the winner.
RidgeFit fit_aom_ridge(const Matrix& x, const Matrix& y, const RidgeConfig& cfg);
RidgeFit fit_aom_ridge(const Matrix& x, const Matrix& y, const RidgeConfig& cfg,
                       const FoldPlan& plan);

/// Ridge on a fixed weighted mixture of all bank operators; only alpha is selected.
RidgeFit fit_mixture_ridge(const Matrix& x, const Matrix& y, const RidgeConfig& cfg,
                           std::vector<double> scales = {});

/// Recomputes beta from the stored dual coefficients and the training spectra.
Matrix beta_from_dual(const RidgeFit& fit, const OperatorBank& bank, const Matrix& x_train);

Matrix predict(const RidgeFit& fit, const Matrix& xnew);

}  // namespace aomcal
