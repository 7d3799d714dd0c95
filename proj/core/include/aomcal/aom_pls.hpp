#pragma once

// Operator-adaptive PLS: the bank is screened on S_b = A_b S and one
// (operator, component count) pair is chosen globally by inner cross-validation.

#include <cstdint>
#include <string>
#include <vector>

#include "aomcal/operators.hpp"
#include "aomcal/pls.hpp"
#include "aomcal/stats.hpp"

namespace aomcal {

enum class Criterion {
  cv_rmse,            // mean held-out RMSE over folds
  press,              // mean held-out sum of squared errors over folds
  covariance,         // negative held-out cosine between centred predictions and responses
  balanced_accuracy,  // negative held-out balanced accuracy (classification)
};

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& name);

struct AomPlsConfig {
  OperatorBank bank;
  int k_max = 15;
  int folds = 5;
  std::uint64_t seed = 0;
  Criterion criterion = Criterion::cv_rmse;
  int threads = 1;
};

/// Criterion values per (fold, operator, K). Lower is better for every criterion.
class SelectionTable {
public:
  SelectionTable() = default;
  SelectionTable(std::vector<std::string> operator_names, int k_max, int folds,
                 Criterion criterion);

  std::size_t operators() const noexcept { return names_.size(); }
  int k_max() const noexcept { return k_max_; }
  int folds() const noexcept { return folds_; }
  Criterion criterion() const noexcept { return criterion_; }
  const std::vector<std::string>& operator_names() const noexcept { return names_; }

  /// NaN marks an unavailable cell.
  double fold_value(int fold, std::size_t op, int k) const;
  void set_fold_value(int fold, std::size_t op, int k, double v);
  /// Mean over folds; NaN if any fold is unavailable.
  double value(std::size_t op, int k) const;
  bool available(std::size_t op, int k) const;
  std::size_t cells() const noexcept { return names_.size() * static_cast<std::size_t>(k_max_); }

  /// Argmin over available cells; ties go to the lower operator index, then lower K.
  void choose();
  std::size_t chosen_operator() const noexcept { return chosen_op_; }
  int chosen_components() const noexcept { return chosen_k_; }

  /// Inner extractions spent building the table.
  std::uint64_t extractions = 0;

  /// Columns operator,K,fold,criterion; per-fold rows then fold=mean rows.
  std::string to_csv() const;
  bool operator==(const SelectionTable& other) const;

private:
  std::vector<std::string> names_;
  int k_max_ = 0;
  int folds_ = 0;
  Criterion criterion_ = Criterion::cv_rmse;
  std::vector<double> values_;
  std::size_t chosen_op_ = 0;
  int chosen_k_ = 0;
};

/// S_b = A_b S for every bank member; cost independent of the sample count.
std::vector<Matrix> screen_bank(const Matrix& s, const OperatorBank& bank);

/// Inner-CV selection. Each fold recomputes centering and S on its training rows only.
SelectionTable select_global(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg);
SelectionTable select_global(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg,
                             const FoldPlan& plan);

struct AomPlsFit {
  PlsFit pls;
  SelectionTable selection;
};

/// select_global, then a full-data SIMPLS refit with the chosen (operator, K).
AomPlsFit fit_aom_pls(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg);
AomPlsFit fit_aom_pls(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg,
                      const FoldPlan& plan);

struct ClassifierFit {
  PlsFit pls;
  std::vector<int> classes;  // output column j predicts classes[j]
  SelectionTable selection;
};

/// One-hot PLS-DA with stratified folds and held-out balanced accuracy as criterion.
ClassifierFit fit_aom_plsda(const Matrix& x, const std::vector<int>& labels, AomPlsConfig cfg);

/// Argmax over the one-hot outputs.
std::vector<int> predict_classes(const ClassifierFit& fit, const Matrix& xnew);
std::vector<int> argmax_classes(const Matrix& scores, const std::vector<int>& classes);

/// One-hot indicator matrix over the sorted distinct labels.
Matrix one_hot(const std::vector<int>& labels, const std::vector<int>& classes);

}  // namespace aomcal
