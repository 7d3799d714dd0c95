#pragma once

// Operator-chain screening. A chain s = (b_1, ..., b_d) denotes the product
// A_s = A_{b_1} ... A_{b_d}. Chains are ranked by the Cauchy-Schwarz ratio
//   ||A_s X^T y||^2 / (||X A_s^T||_F^2 ||y||^2),
// whose denominator comes from a truncated SVD of X; the survivors are
// blended by NNLS into one operator, fitted with PLS, and finished with a
// small ridge on the PLS scores.

#include <cstdint>
#include <string>
#include <vector>

#include "aomcal/aom_pls.hpp"
#include "aomcal/operators.hpp"
#include "aomcal/pls.hpp"

namespace aomcal {

using Chain = std::vector<std::size_t>;

/// The identity chain {0}, then every ordered tuple of non-identity bank
/// members of length 1..depth. Bank index 0 must be the identity.
std::vector<Chain> enumerate_chains(const OperatorBank& bank, int depth);

LinOp chain_operator(const OperatorBank& bank, const Chain& chain);
std::string chain_name(const OperatorBank& bank, const Chain& chain);

struct TruncatedSvd {
  Matrix u;      // n x r
  Vector sigma;  // r, descending
  Matrix v;      // p x r
  int iterations = 0;
  double residual = 0;  // ||M V - U diag(sigma)||_F / sigma_1
};

/// Seeded randomized subspace iteration. Throws NumericError when the relative
/// residual has not reached `tol` after `max_iter` iterations.
TruncatedSvd truncated_svd(const Matrix& m, Index rank, std::uint64_t seed = 0,
                           double tol = 1e-10, int max_iter = 300);

struct ChainScore {
  double score = 0;  // clamped to [0, 1]
  double raw = 0;    // before clamping
  bool clamped = false;
  bool zero_response = false;
};

/// Numerator ||A_s X^T y||^2 from the precomputed X^T y; denominator
/// sum_i sigma_i^2 ||A_s v_i||^2 ||y||^2 from the truncated SVD of X.
ChainScore chain_score(const LinOp& chain_op, const TruncatedSvd& base, const Vector& xty,
                       double y_norm);

struct ChainCandidate {
  Chain chain;
  std::string name;
  double score = 0;
  double raw_score = 0;
  bool clamped = false;
  double weight = 0;  // normalised NNLS weight once blended
};

/// Scores every chain; touches only X^T y and the truncated SVD.
std::vector<ChainCandidate> score_chains(const OperatorBank& bank, const std::vector<Chain>& chains,
                                         const TruncatedSvd& base, const Vector& xty,
                                         double y_norm, int threads = 1);

struct NnlsResult {
  Vector w;
  int iterations = 0;
  double kkt = 0;
};

/// Lawson-Hanson active set: min ||M w - b|| subject to w >= 0.
NnlsResult nnls(const Matrix& m, const Vector& b, int max_iter = 0);

/// max_i |min(w_i, g_i)| + max(0, -min_i w_i) with g = M^T (M w - b), divided
/// by max(1, ||M^T b||_inf).
double nnls_kkt_residual(const Matrix& m, const Vector& b, const Vector& w);

struct FastAomConfig {
  OperatorBank bank;
  int depth = 2;
  Index svd_rank = 0;  // 0 selects min(n, p, 100)
  int top_m = 8;
  int folds = 5;
  std::uint64_t seed = 0;
  int k_max = 15;
  int threads = 1;
};

struct FastAomFit {
  std::vector<ChainCandidate> survivors;  // descending score
  Vector weights;                         // NNLS weights before normalisation
  LinOp mixed;                            // sum of normalised weights times survivor operators
  PlsFit pls_stage;
  SelectionTable pls_selection;
  double ridge_alpha = 0;
  Vector gamma;         // ridge coefficients on the PLS scores
  Matrix coefficients;  // p x 1, Z gamma
  RowVector x_mean;
  RowVector y_mean;
  std::size_t chains_scored = 0;
  std::size_t clamp_events = 0;

  /// Columns chain,score,weight.
  std::string survivor_csv() const;
};

/// Single-response fit. Throws ConfigError for multi-column Y.
FastAomFit fit_fastaom(const Matrix& x, const Matrix& y, const FastAomConfig& cfg);

/// Linear prediction from the stored coefficients.
Matrix predict(const FastAomFit& fit, const Matrix& xnew);

/// Same prediction routed through the PLS scores and the ridge stage.
Matrix predict_staged(const FastAomFit& fit, const Matrix& xnew);

}  // namespace aomcal
