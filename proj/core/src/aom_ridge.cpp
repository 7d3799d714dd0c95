#include "aomcal/aom_ridge.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>

#include "aomcal/error.hpp"
#include "aomcal/parallel.hpp"

namespace aomcal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  for (double a : alphas)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("alpha must be positive and finite");
}

// Training and validation blocks of one fold, both centred on the training means.
struct FoldBlocks {
  CenteredData train;
  Matrix xc_val;
  Matrix y_val;
};

std::vector<FoldBlocks> fold_blocks(const Matrix& x, const Matrix& y, const FoldPlan& plan) {
  std::vector<FoldBlocks> out(plan.size());
  for (std::size_t f = 0; f < plan.size(); ++f) {
    const Fold& fold = plan.folds[f];
    out[f].train = center(take_rows(x, fold.train), take_rows(y, fold.train));
    out[f].xc_val = take_rows(x, fold.validation).rowwise() - out[f].train.x_mean;
    out[f].y_val = take_rows(y, fold.validation);
  }
  return out;
}

// Scores every alpha for one kernel pair: k (train x train) and cross (val x train).
void sweep(const Matrix& k, const Matrix& cross, const FoldBlocks& fb,
           const std::vector<double>& alphas, RidgeTable& table, int fold, std::size_t cand) {
  const KernelEigen eig(k, fb.train.yc);
  const Matrix g = cross * eig.vectors;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const Vector inv = (eig.values.array() + alphas[a]).inverse();
    const Matrix yhat =
        (g * (inv.asDiagonal() * eig.projected)).rowwise() + fb.train.y_mean;
    table.set_fold_value(fold, cand, a, rmsep(yhat, fb.y_val));
  }
}

RidgeFit finish_single(const Matrix& x, const Matrix& y, const RidgeConfig& cfg,
                       RidgeTable table) {
  RidgeFit fit;
  const std::size_t b = table.chosen_candidate();
  fit.alpha = table.chosen_alpha();
  const CenteredData d = center(x, y);
  const LinOp& op = cfg.bank.ops[b];
  fit.dual = dual_solve(operator_kernel(d, op), fit.alpha, d.yc);
  fit.beta = ridge_coefficients(op, d, fit.dual);
  fit.operator_id = static_cast<int>(b);
  fit.operator_name = cfg.bank.names[b];
  fit.x_mean = d.x_mean;
  fit.y_mean = d.y_mean;
  fit.table = std::move(table);
  return fit;
}

}  // namespace

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(50);
  for (int i = 0; i < 50; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -6.0 + 9.0 * i / 49.0);
  return grid;
}

Matrix operator_kernel(const CenteredData& d, const LinOp& op) {
  if (op.size() != d.channels())
    throw DimensionError("operator_kernel: operator size " + std::to_string(op.size()) +
                         " does not match " + std::to_string(d.channels()) + " channels");
  const Matrix w = apply_rows(op, d.xc);
  return w * w.transpose();
}

Matrix dual_solve(const Matrix& k, double alpha, const Matrix& yc) {
  if (!(alpha > 0.0)) throw ConfigError("dual_solve: alpha must be positive");
  if (k.rows() != k.cols() || k.rows() != yc.rows())
    throw DimensionError("dual_solve: kernel and response shapes disagree");
  Matrix shifted = k;
  shifted.diagonal().array() += alpha;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "dual_solve: Cholesky failed (n=" << k.rows() << ", trace=" << k.trace()
        << ", min diagonal=" << k.diagonal().minCoeff() << ", alpha=" << alpha << ")";
    throw NumericError(msg.str());
  }
  return llt.solve(yc);
}

KernelEigen::KernelEigen(const Matrix& k, const Matrix& yc) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  if (es.info() != Eigen::Success)
    throw NumericError("kernel eigendecomposition failed (n=" + std::to_string(k.rows()) + ")");
  // Negative eigenvalues of a PSD kernel are rounding noise.
  values = es.eigenvalues().cwiseMax(0.0);
  vectors = es.eigenvectors();
  projected = vectors.transpose() * yc;
}

Matrix KernelEigen::dual(double alpha) const {
  const Vector inv = (values.array() + alpha).inverse();
  return vectors * (inv.asDiagonal() * projected);
}

Matrix ridge_coefficients(const LinOp& op, const CenteredData& d, const Matrix& dual) {
  if (dual.rows() != d.samples())
    throw DimensionError("ridge_coefficients: dual has " + std::to_string(dual.rows()) +
                         " rows for " + std::to_string(d.samples()) + " samples");
  return apply_adjoint(op, apply_forward(op, d.xc.transpose() * dual));
}

std::vector<double> default_mixture_scales(const CenteredData& d, const std::vector<LinOp>& ops) {
  std::vector<double> scales;
  const double cells = static_cast<double>(d.samples() * d.channels());
  for (const auto& op : ops) {
    const double rms = apply_rows(op, d.xc).norm() / std::sqrt(cells);
    scales.push_back(rms > 0 ? 1.0 / rms : 0.0);
  }
  return scales;
}

MixtureKernel mixture_kernel(const CenteredData& d, const std::vector<LinOp>& ops,
                             std::vector<double> scales) {
  if (ops.empty()) throw ConfigError("mixture_kernel: no operators");
  if (scales.empty()) scales = default_mixture_scales(d, ops);
  if (scales.size() != ops.size())
    throw ConfigError("mixture_kernel: " + std::to_string(scales.size()) + " scales for " +
                      std::to_string(ops.size()) + " operators");
  bool any = false;
  for (double s : scales) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("mixture_kernel: scales must be >= 0");
    any = any || s > 0.0;
  }
  if (!any) throw ConfigError("mixture_kernel: all scales are zero");

  MixtureKernel mk;
  mk.kernel = Matrix::Zero(d.samples(), d.samples());
  for (std::size_t b = 0; b < ops.size(); ++b)
    if (scales[b] > 0.0) mk.kernel += scales[b] * scales[b] * operator_kernel(d, ops[b]);
  mk.scales = scales;
  mk.recover = [ops, scales, xct = Matrix(d.xc.transpose())](const Matrix& c) {
    const Matrix v = xct * c;
    Matrix beta = Matrix::Zero(v.rows(), v.cols());
    for (std::size_t b = 0; b < ops.size(); ++b)
      if (scales[b] > 0.0)
        beta += scales[b] * scales[b] * apply_adjoint(ops[b], apply_forward(ops[b], v));
    return beta;
  };
  return mk;
}

RidgeTable::RidgeTable(std::vector<std::string> candidate_names, std::vector<double> alphas,
                       int folds)
    : names_(std::move(candidate_names)),
      alphas_(std::move(alphas)),
      folds_(folds),
      values_(names_.size() * alphas_.size() * static_cast<std::size_t>(folds), kNaN) {}

double RidgeTable::fold_value(int fold, std::size_t candidate, std::size_t alpha) const {
  return values_[(static_cast<std::size_t>(fold) * names_.size() + candidate) * alphas_.size() +
                 alpha];
}

void RidgeTable::set_fold_value(int fold, std::size_t candidate, std::size_t alpha, double v) {
  values_[(static_cast<std::size_t>(fold) * names_.size() + candidate) * alphas_.size() + alpha] =
      v;
}

double RidgeTable::value(std::size_t candidate, std::size_t alpha) const {
  double sum = 0.0;
  for (int f = 0; f < folds_; ++f) {
    const double v = fold_value(f, candidate, alpha);
    if (std::isnan(v)) return kNaN;
    sum += v;
  }
  return sum / folds_;
}

void RidgeTable::choose() {
  bool found = false;
  double best = 0.0;
  for (std::size_t c = 0; c < names_.size(); ++c)
    for (std::size_t a = 0; a < alphas_.size(); ++a) {
      const double v = value(c, a);
      if (!std::isnan(v) && (!found || v < best)) {
        best = v;
        chosen_c_ = c;
        chosen_a_ = a;
        found = true;
      }
    }
  if (!found) throw NumericError("ridge selection: no finite (operator, alpha) cell");
}

std::string RidgeTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "candidate,alpha,fold,rmse\n";
  auto row = [&](std::size_t c, std::size_t a, const std::string& fold, double v) {
    out << '"' << names_[c] << "\"," << alphas_[a] << ',' << fold << ',';
    if (std::isnan(v)) out << "NA"; else out << v;
    out << '\n';
  };
  for (int f = 0; f < folds_; ++f)
    for (std::size_t c = 0; c < names_.size(); ++c)
      for (std::size_t a = 0; a < alphas_.size(); ++a)
        row(c, a, std::to_string(f), fold_value(f, c, a));
  for (std::size_t c = 0; c < names_.size(); ++c)
    for (std::size_t a = 0; a < alphas_.size(); ++a) row(c, a, "mean", value(c, a));
  return out.str();
}

bool RidgeTable::operator==(const RidgeTable& o) const {
  if (names_ != o.names_ || alphas_ != o.alphas_ || folds_ != o.folds_ ||
      chosen_c_ != o.chosen_c_ || chosen_a_ != o.chosen_a_ || values_.size() != o.values_.size())
    return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const bool na = std::isnan(values_[i]), nb = std::isnan(o.values_[i]);
    if (na != nb || (!na && values_[i] != o.values_[i])) return false;
  }
  return true;
}

RidgeFit fit_aom_ridge(const Matrix& x, const Matrix& y, const RidgeConfig& cfg) {
  if (x.rows() < cfg.folds)
    throw ConfigError("fit_aom_ridge: " + std::to_string(x.rows()) + " samples for " +
                      std::to_string(cfg.folds) + " folds");
  return fit_aom_ridge(x, y, cfg, kfold_plan(x.rows(), cfg.folds, cfg.seed));
}

RidgeFit fit_aom_ridge(const Matrix& x, const Matrix& y, const RidgeConfig& cfg,
                       const FoldPlan& plan) {
  if (cfg.bank.size() == 0) throw ConfigError("fit_aom_ridge: empty operator bank");
  check_alphas(cfg.alphas);
  if (plan.size() < 2) throw ConfigError("fit_aom_ridge: need at least 2 folds");
  if (x.rows() != y.rows()) throw DimensionError("fit_aom_ridge: X and Y row counts differ");

  const std::vector<FoldBlocks> blocks = fold_blocks(x, y, plan);
  const std::size_t nb = cfg.bank.size();
  RidgeTable table(cfg.bank.names, cfg.alphas, static_cast<int>(plan.size()));
  parallel_for(plan.size() * nb, cfg.threads, [&](std::size_t cell) {
    const std::size_t f = cell / nb, b = cell % nb;
    const FoldBlocks& fb = blocks[f];
    const LinOp& op = cfg.bank.ops[b];
    const Matrix w_tr = apply_rows(op, fb.train.xc);
    const Matrix w_val = apply_rows(op, fb.xc_val);
    sweep(w_tr * w_tr.transpose(), w_val * w_tr.transpose(), fb, cfg.alphas, table,
          static_cast<int>(f), b);
  });
  table.choose();
  return finish_single(x, y, cfg, std::move(table));
}

RidgeFit fit_mixture_ridge(const Matrix& x, const Matrix& y, const RidgeConfig& cfg,
                           std::vector<double> scales) {
  if (cfg.bank.size() == 0) throw ConfigError("fit_mixture_ridge: empty operator bank");
  check_alphas(cfg.alphas);
  if (x.rows() < cfg.folds)
    throw ConfigError("fit_mixture_ridge: " + std::to_string(x.rows()) + " samples for " +
                      std::to_string(cfg.folds) + " folds");
  const FoldPlan plan = kfold_plan(x.rows(), cfg.folds, cfg.seed);
  const std::vector<FoldBlocks> blocks = fold_blocks(x, y, plan);
  RidgeTable table({"mixture"}, cfg.alphas, static_cast<int>(plan.size()));
  parallel_for(plan.size(), cfg.threads, [&](std::size_t f) {
    const FoldBlocks& fb = blocks[f];
    const MixtureKernel mk = mixture_kernel(fb.train, cfg.bank.ops, scales);
    Matrix cross = Matrix::Zero(fb.xc_val.rows(), fb.train.samples());
    for (std::size_t b = 0; b < cfg.bank.size(); ++b) {
      const double s2 = mk.scales[b] * mk.scales[b];
      if (s2 == 0.0) continue;
      cross += s2 * apply_rows(cfg.bank.ops[b], fb.xc_val) *
               apply_rows(cfg.bank.ops[b], fb.train.xc).transpose();
    }
    sweep(mk.kernel, cross, fb, cfg.alphas, table, static_cast<int>(f), 0);
  });
  table.choose();

  RidgeFit fit;
  const CenteredData d = center(x, y);
  const MixtureKernel mk = mixture_kernel(d, cfg.bank.ops, scales);
  fit.alpha = table.chosen_alpha();
  fit.dual = dual_solve(mk.kernel, fit.alpha, d.yc);
  fit.beta = mk.recover(fit.dual);
  fit.operator_id = -1;
  fit.operator_name = "mixture";
  fit.scales = mk.scales;
  fit.x_mean = d.x_mean;
  fit.y_mean = d.y_mean;
  fit.table = std::move(table);
  return fit;
}

Matrix beta_from_dual(const RidgeFit& fit, const OperatorBank& bank, const Matrix& x_train) {
  CenteredData d;
  d.x_mean = fit.x_mean;
  d.xc = x_train.rowwise() - fit.x_mean;
  if (fit.operator_id < 0) {
    if (fit.scales.size() != bank.size())
      throw ConfigError("beta_from_dual: mixture scales do not match the bank");
    return mixture_kernel(d, bank.ops, fit.scales).recover(fit.dual);
  }
  if (static_cast<std::size_t>(fit.operator_id) >= bank.size())
    throw ConfigError("beta_from_dual: operator id outside the bank");
  return ridge_coefficients(bank.ops[static_cast<std::size_t>(fit.operator_id)], d, fit.dual);
}

Matrix predict(const RidgeFit& fit, const Matrix& xnew) {
  return predict_linear(fit.beta, fit.x_mean, fit.y_mean, xnew);
}

}  // namespace aomcal
