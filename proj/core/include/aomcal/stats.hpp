#pragma once

// Fold plans, deterministic SPXY splitting, metrics, paired-benchmark
// statistics and the two selection diagnostics (winner bias, vertex optimum).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aomcal/operators.hpp"
#include "aomcal/types.hpp"

namespace aomcal {

struct Fold {
  std::vector<Index> train;
  std::vector<Index> validation;
};

struct FoldPlan {
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
  bool stratified = false;

  std::size_t size() const noexcept { return folds.size(); }
};

/// Seeded shuffle then contiguous blocks; with labels, each class is shuffled
/// and dealt across folds so per-class counts differ by at most one.
FoldPlan kfold_plan(Index n, int k, std::uint64_t seed,
                    const std::vector<int>* labels = nullptr);

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
  bool fallback = false;  // all distances were zero; index order used
};

/// SPXY partitioning on max-normalised Euclidean X and y distances.
Split spxy_split(const Matrix& x, const Matrix& y, double test_fraction);

/// Per-class Kennard-Stone selection on X distances with class-proportional quotas.
Split stratified_spxy_split(const Matrix& x, const std::vector<int>& labels,
                            double test_fraction);

/// Gather the listed rows.
Matrix take_rows(const Matrix& m, const std::vector<Index>& rows);

double rmsep(const Matrix& yhat, const Matrix& y);

/// Mean per-class recall over the classes present in `truth`.
double balanced_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);
/// Same over an explicit class list; throws DataError if a class is absent from truth.
double balanced_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                         const std::vector<int>& classes);

struct WilcoxonResult {
  double w_plus = 0;       // rank sum of positive differences
  Index n_nonzero = 0;
  double p_less = 1.0;     // P(W+ <= observed) under H0; small when differences are negative
  bool exact = true;
};

/// One-sided signed-rank test of H1: differences tend to be negative.
/// Zeros are dropped; ties get average ranks. Exact null distribution for
/// n <= 25 non-zero differences, normal approximation with continuity and
/// tie correction above.
WilcoxonResult wilcoxon_signed_rank_less(const std::vector<double>& differences);

/// Holm step-down adjusted p-values, returned in input order.
std::vector<double> holm_adjust(const std::vector<double>& p_values);

struct PairedSummary {
  std::string label;
  Index n = 0;
  double median_ratio = 1.0;
  Index wins = 0;
  double ci_lo = 1.0;
  double ci_hi = 1.0;
  double p_one_sided = 1.0;
  double p_holm = 1.0;
};

/// Paired ratios a_i / b_i: median, wins (#ratio < 1), percentile paired
/// bootstrap CI of the median, one-sided Wilcoxon on the log-ratios.
PairedSummary paired_summary(const std::vector<double>& a, const std::vector<double>& b,
                             int bootstrap_n = 10000, std::uint64_t seed = 0);

/// Fills p_holm across one declared comparison family.
void apply_holm(std::vector<PairedSummary>& family);

/// CSV with columns comparison,N,median_ratio,ci_lo,ci_hi,wins,p_one_sided,p_holm.
std::string summary_table_csv(const std::vector<PairedSummary>& rows);

/// Optimistic bias sigma / sqrt(n_holdout) * sqrt(2 ln B) of the minimum of
/// B noisy validation scores.
double winner_bias(double candidates, double sigma, double n_holdout);

struct VertexReport {
  double vertex_max = 0;
  double best_interior = 0;
  bool holds = true;
};

/// Gram of the screened cross-covariances, G_bc = <A_b S, A_c S>_F.
Matrix operator_gram(const OperatorBank& bank, const Matrix& s);

/// Compares the best vertex of f(a) = a^T G a with random simplex points.
VertexReport vertex_check(const Matrix& gram, int sample_count, std::uint64_t seed);
VertexReport vertex_check(const OperatorBank& bank, const Matrix& s, int sample_count,
                          std::uint64_t seed);

}  // namespace aomcal
