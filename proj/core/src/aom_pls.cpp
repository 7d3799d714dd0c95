#include "aomcal/aom_pls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "aomcal/error.hpp"
#include "aomcal/parallel.hpp"

namespace aomcal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> row_argmax(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    Index best = 0;
    m.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double score(Criterion c, const Matrix& yhat, const Matrix& ytrue) {
  switch (c) {
    case Criterion::cv_rmse:
      return rmsep(yhat, ytrue);
    case Criterion::press:
      return (yhat - ytrue).squaredNorm();
    case Criterion::covariance: {
      const Matrix a = yhat.rowwise() - yhat.colwise().mean();
      const Matrix b = ytrue.rowwise() - ytrue.colwise().mean();
      const double denom = a.norm() * b.norm();
      return denom > 0 ? -(a.cwiseProduct(b).sum()) / denom : 0.0;
    }
    case Criterion::balanced_accuracy:
      return -balanced_accuracy(row_argmax(yhat), row_argmax(ytrue));
  }
  return kNaN;
}

}  // namespace

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::cv_rmse:
      return "cv_rmse";
    case Criterion::press:
      return "press";
    case Criterion::covariance:
      return "covariance";
    case Criterion::balanced_accuracy:
      return "balanced_accuracy";
  }
  return "unknown";
}

Criterion parse_criterion(const std::string& name) {
  for (Criterion c : {Criterion::cv_rmse, Criterion::press, Criterion::covariance,
                      Criterion::balanced_accuracy})
    if (to_string(c) == name) return c;
  throw ConfigError("unknown criterion '" + name + "'");
}

SelectionTable::SelectionTable(std::vector<std::string> operator_names, int k_max, int folds,
                               Criterion criterion)
    : names_(std::move(operator_names)),
      k_max_(k_max),
      folds_(folds),
      criterion_(criterion),
      values_(names_.size() * static_cast<std::size_t>(k_max) * static_cast<std::size_t>(folds),
              kNaN) {}

double SelectionTable::fold_value(int fold, std::size_t op, int k) const {
  return values_[(static_cast<std::size_t>(fold) * names_.size() + op) *
                     static_cast<std::size_t>(k_max_) +
                 static_cast<std::size_t>(k - 1)];
}

void SelectionTable::set_fold_value(int fold, std::size_t op, int k, double v) {
  values_[(static_cast<std::size_t>(fold) * names_.size() + op) * static_cast<std::size_t>(k_max_) +
          static_cast<std::size_t>(k - 1)] = v;
}

double SelectionTable::value(std::size_t op, int k) const {
  double sum = 0.0;
  for (int f = 0; f < folds_; ++f) {
    const double v = fold_value(f, op, k);
    if (std::isnan(v)) return kNaN;
    sum += v;
  }
  return sum / folds_;
}

bool SelectionTable::available(std::size_t op, int k) const { return !std::isnan(value(op, k)); }

void SelectionTable::choose() {
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t b = 0; b < names_.size(); ++b)
    for (int k = 1; k <= k_max_; ++k) {
      const double v = value(b, k);
      if (!std::isnan(v) && (!found || v < best)) {
        best = v;
        chosen_op_ = b;
        chosen_k_ = k;
        found = true;
      }
    }
  if (!found) throw NumericError("selection: no available (operator, K) cell");
}

std::string SelectionTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "operator,K,fold,criterion\n";
  auto quoted = [](const std::string& s) { return "\"" + s + "\""; };
  for (int f = 0; f < folds_; ++f)
    for (std::size_t b = 0; b < names_.size(); ++b)
      for (int k = 1; k <= k_max_; ++k) {
        const double v = fold_value(f, b, k);
        out << quoted(names_[b]) << ',' << k << ',' << f << ',';
        if (std::isnan(v)) out << "NA"; else out << v;
        out << '\n';
      }
  for (std::size_t b = 0; b < names_.size(); ++b)
    for (int k = 1; k <= k_max_; ++k) {
      const double v = value(b, k);
      out << quoted(names_[b]) << ',' << k << ",mean,";
      if (std::isnan(v)) out << "NA"; else out << v;
      out << '\n';
    }
  return out.str();
}

bool SelectionTable::operator==(const SelectionTable& o) const {
  if (names_ != o.names_ || k_max_ != o.k_max_ || folds_ != o.folds_ ||
      criterion_ != o.criterion_ || chosen_op_ != o.chosen_op_ || chosen_k_ != o.chosen_k_ ||
      values_.size() != o.values_.size())
    return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const bool na = std::isnan(values_[i]), nb = std::isnan(o.values_[i]);
    if (na != nb || (!na && values_[i] != o.values_[i])) return false;
  }
  return true;
}

std::vector<Matrix> screen_bank(const Matrix& s, const OperatorBank& bank) {
  std::vector<Matrix> out;
  out.reserve(bank.size());
  for (const auto& op : bank.ops) out.push_back(apply_forward(op, s));
  return out;
}

SelectionTable select_global(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg) {
  if (x.rows() < cfg.folds)
    throw ConfigError("select_global: " + std::to_string(x.rows()) + " samples for " +
                      std::to_string(cfg.folds) + " folds");
  return select_global(x, y, cfg, kfold_plan(x.rows(), cfg.folds, cfg.seed));
}

SelectionTable select_global(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg,
                             const FoldPlan& plan) {
  if (cfg.bank.size() == 0) throw ConfigError("select_global: empty operator bank");
  if (cfg.k_max < 1) throw ConfigError("select_global: k_max must be >= 1");
  if (plan.size() < 2) throw ConfigError("select_global: need at least 2 folds");
  if (x.rows() != y.rows()) throw DimensionError("select_global: X and Y row counts differ");

  const int folds = static_cast<int>(plan.size());
  const std::size_t nb = cfg.bank.size();
  SelectionTable table(cfg.bank.names, cfg.k_max, folds, cfg.criterion);

  // Centering and S depend only on the fold, so they are shared by all operators.
  struct FoldData {
    CenteredData train;
    Matrix s;
    Matrix x_val;
    Matrix y_val;
  };
  std::vector<FoldData> fold_data(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    const Fold& fold = plan.folds[static_cast<std::size_t>(f)];
    auto& fd = fold_data[static_cast<std::size_t>(f)];
    fd.train = center(take_rows(x, fold.train), take_rows(y, fold.train));
    fd.s = cross_covariance(fd.train);
    fd.x_val = take_rows(x, fold.validation);
    fd.y_val = take_rows(y, fold.validation);
  }

  std::vector<std::uint64_t> spent(static_cast<std::size_t>(folds) * nb, 0);
  parallel_for(static_cast<std::size_t>(folds) * nb, cfg.threads, [&](std::size_t cell) {
    const int f = static_cast<int>(cell / nb);
    const std::size_t b = cell % nb;
    const auto& fd = fold_data[static_cast<std::size_t>(f)];
    const Index cap = std::min<Index>(cfg.k_max,
                                      std::min(fd.train.samples() - 1, fd.train.channels()));
    if (cap < 1 || fd.x_val.rows() == 0) return;
    const PlsFit fit = simpls_extract(fd.s, fd.train, cfg.bank.ops[b], cap);
    spent[cell] = 1;
    const Index usable = fit.degenerate ? cap : fit.n_components;
    for (Index k = 1; k <= usable; ++k) {
      const Matrix coef = fit.degenerate ? fit.coefficients : fit.coefficients_for(k);
      const Matrix yhat = predict_linear(coef, fit.x_mean, fit.y_mean, fd.x_val);
      table.set_fold_value(f, b, static_cast<int>(k), score(cfg.criterion, yhat, fd.y_val));
    }
  });
  for (auto s : spent) table.extractions += s;
  table.choose();
  return table;
}

AomPlsFit fit_aom_pls(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg) {
  if (x.rows() < cfg.folds)
    throw ConfigError("fit_aom_pls: " + std::to_string(x.rows()) + " samples for " +
                      std::to_string(cfg.folds) + " folds");
  return fit_aom_pls(x, y, cfg, kfold_plan(x.rows(), cfg.folds, cfg.seed));
}

AomPlsFit fit_aom_pls(const Matrix& x, const Matrix& y, const AomPlsConfig& cfg,
                      const FoldPlan& plan) {
  AomPlsFit out;
  out.selection = select_global(x, y, cfg, plan);
  const std::size_t b = out.selection.chosen_operator();
  const CenteredData d = center(x, y);
  out.pls = simpls_extract(cross_covariance(d), d, cfg.bank.ops[b],
                           out.selection.chosen_components());
  out.pls.operator_id = static_cast<int>(b);
  out.pls.operator_name = cfg.bank.names[b];
  return out;
}

Matrix one_hot(const std::vector<int>& labels, const std::vector<int>& classes) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), static_cast<Index>(classes.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(classes.begin(), classes.end(), labels[i]);
    if (it == classes.end()) throw DataError("one_hot: unknown label " + std::to_string(labels[i]));
    y(static_cast<Index>(i), it - classes.begin()) = 1.0;
  }
  return y;
}

std::vector<int> argmax_classes(const Matrix& scores, const std::vector<int>& classes) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(scores.rows()));
  for (int idx : row_argmax(scores)) out.push_back(classes[static_cast<std::size_t>(idx)]);
  return out;
}

ClassifierFit fit_aom_plsda(const Matrix& x, const std::vector<int>& labels, AomPlsConfig cfg) {
  if (static_cast<Index>(labels.size()) != x.rows())
    throw DimensionError("fit_aom_plsda: label count does not match sample count");
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw ConfigError("fit_aom_plsda: need at least 2 classes");
  ClassifierFit out;
  out.classes.assign(distinct.begin(), distinct.end());
  const Matrix y = one_hot(labels, out.classes);
  cfg.criterion = Criterion::balanced_accuracy;
  const FoldPlan plan = kfold_plan(x.rows(), cfg.folds, cfg.seed, &labels);
  AomPlsFit fit = fit_aom_pls(x, y, cfg, plan);
  out.pls = std::move(fit.pls);
  out.selection = std::move(fit.selection);
  return out;
}

std::vector<int> predict_classes(const ClassifierFit& fit, const Matrix& xnew) {
  return argmax_classes(predict(fit.pls, xnew), fit.classes);
}

}  // namespace aomcal
