#include "aomcal/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "aomcal/aom_ridge.hpp"
#include "aomcal/error.hpp"
#include "aomcal/linalg.hpp"
#include "aomcal/parallel.hpp"
#include "aomcal/rng.hpp"

namespace aomcal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rel(const Matrix& got, const Matrix& ref) {
  const double scale = std::max(1.0, ref.size() ? ref.cwiseAbs().maxCoeff() : 0.0);
  return (got.size() ? (got - ref).cwiseAbs().maxCoeff() : 0.0) / scale;
}

struct Centered {
  Matrix xc, yc;
  RowVector xm, ym;
};

Centered centre(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw DimensionError("reference: X and Y row counts differ");
  Centered c;
  c.xm = x.colwise().mean();
  c.ym = y.colwise().mean();
  c.xc = x.rowwise() - c.xm;
  c.yc = y.rowwise() - c.ym;
  return c;
}

// Operator-free SIMPLS; weights R, X loadings P, Y loadings Q for prefix recovery.
struct PlainSimpls {
  Matrix r, p, q;
  Index achieved = 0;
};

PlainSimpls plain_simpls(const Matrix& xc, const Matrix& yc, Index k) {
  PlainSimpls out;
  Matrix s = xc.transpose() * yc;
  const double s0 = s.norm();
  const Index p = xc.cols();
  out.r.resize(p, k);
  out.p.resize(p, k);
  out.q.resize(yc.cols(), k);
  Matrix v(p, k);
  if (s0 == 0.0) return out;
  const double x_norm = xc.norm();
  Index a = 0;
  for (; a < k; ++a) {
    if (s.norm() <= 1e-12 * s0) break;
    const Vector r = leading_left_singular_vector(s).vector;
    Vector t = xc * r;
    const double tn = t.norm();
    if (tn <= 1e-12 * x_norm * r.norm() || tn == 0.0) break;
    t /= tn;
    const Vector pa = xc.transpose() * t;
    out.r.col(a) = r;
    out.p.col(a) = pa;
    out.q.col(a) = yc.transpose() * t;
    Vector va = pa;
    if (a > 0) {
      const auto b = v.leftCols(a);
      for (int pass = 0; pass < 2; ++pass) va -= b * (b.transpose() * va);
    }
    const double vn = va.norm();
    if (vn <= 1e-12 * pa.norm()) {
      ++a;
      break;
    }
    v.col(a) = va / vn;
    s -= v.col(a) * (v.col(a).transpose() * s);
  }
  out.achieved = a;
  return out;
}

Matrix plain_coefficients(const PlainSimpls& f, Index k) {
  const Matrix core = f.p.leftCols(k).transpose() * f.r.leftCols(k);
  return f.r.leftCols(k) * pseudo_inverse(core, 1e-10) * f.q.leftCols(k).transpose();
}

Matrix smooth_spectra(Index n, Index p, Rng& rng) {
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i) {
    const double f1 = 0.5 + rng.uniform() * 3.0, f2 = 4.0 + rng.uniform() * 6.0;
    const double a1 = rng.normal(), a2 = 0.5 * rng.normal(), off = rng.normal();
    for (Index j = 0; j < p; ++j) {
      const double u = static_cast<double>(j) / static_cast<double>(p);
      x(i, j) = off + a1 * std::sin(f1 * 6.283185307179586 * u) +
                a2 * std::cos(f2 * 6.283185307179586 * u) + 0.05 * rng.normal();
    }
  }
  return x;
}

}  // namespace

Matrix ReferenceFit::predict(const Matrix& xt_new) const {
  if (xt_new.cols() != coefficients.rows())
    throw DimensionError("reference predict: column count mismatch");
  return ((xt_new.rowwise() - x_mean) * coefficients).rowwise() + y_mean;
}

ReferenceFit reference_pls(const Matrix& xt, const Matrix& y, Index k) {
  const Centered c = centre(xt, y);
  const Index cap = std::min(xt.rows() - 1, xt.cols());
  if (k < 1 || k > cap)
    throw ConfigError("reference_pls: component count " + std::to_string(k) + " outside [1, " +
                      std::to_string(cap) + "]");
  ReferenceFit fit;
  fit.x_mean = c.xm;
  fit.y_mean = c.ym;
  const Index p = xt.cols();
  Matrix s = c.xc.transpose() * c.yc;
  const double s0 = s.norm();
  Matrix r(p, k), q(y.cols(), k), v(p, k);
  Index a = 0;
  for (; a < k && s0 > 0.0; ++a) {
    if (s.norm() <= 1e-12 * s0) break;
    Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeThinU);
    Vector ra = svd.matrixU().col(0);
    Vector t = c.xc * ra;
    const double tn = t.norm();
    if (tn <= 1e-12 * c.xc.norm()) break;
    t /= tn;
    ra /= tn;
    const Vector pa = c.xc.transpose() * t;
    r.col(a) = ra;
    q.col(a) = c.yc.transpose() * t;
    Vector va = pa;
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < a; ++j) va -= v.col(j) * v.col(j).dot(va);
    const double vn = va.norm();
    if (vn <= 1e-12 * pa.norm()) {
      ++a;
      break;
    }
    v.col(a) = va / vn;
    s -= v.col(a) * (v.col(a).transpose() * s);
  }
  fit.n_components = a;
  fit.coefficients = r.leftCols(a) * q.leftCols(a).transpose();
  return fit;
}

ReferenceFit reference_nipals(const Matrix& xt, const Matrix& y, Index k) {
  const Centered c = centre(xt, y);
  const Index cap = std::min(xt.rows() - 1, xt.cols());
  if (k < 1 || k > cap) throw ConfigError("reference_nipals: component count out of range");
  Matrix e = c.xc, f = c.yc;
  const Index p = xt.cols();
  Matrix w(p, k), pl(p, k), cl(y.cols(), k);
  for (Index a = 0; a < k; ++a) {
    Index col = 0;
    f.colwise().squaredNorm().maxCoeff(&col);
    Vector u = f.col(col);
    Vector t_old = Vector::Zero(e.rows());
    Vector wa, t, ca;
    bool converged = false;
    for (int it = 0; it < 5000; ++it) {
      wa = (e.transpose() * u).normalized();
      t = e * wa;
      ca = f.transpose() * t / t.squaredNorm();
      if (f.cols() == 1 || (t - t_old).norm() <= 1e-14 * t.norm()) {
        converged = true;
        break;
      }
      t_old = t;
      u = f * ca / ca.squaredNorm();
    }
    if (!converged) throw NumericError("reference_nipals: no convergence");
    const Vector pa = e.transpose() * t / t.squaredNorm();
    e -= t * pa.transpose();
    f -= t * ca.transpose();
    w.col(a) = wa;
    pl.col(a) = pa;
    cl.col(a) = ca;
  }
  ReferenceFit fit;
  fit.x_mean = c.xm;
  fit.y_mean = c.ym;
  fit.n_components = k;
  fit.coefficients = w * (pl.transpose() * w).inverse() * cl.transpose();
  return fit;
}

ReferenceFit reference_ridge(const Matrix& xt, const Matrix& y, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("reference_ridge: alpha must be positive");
  const Centered c = centre(xt, y);
  Matrix g = c.xc.transpose() * c.xc;
  g.diagonal().array() += alpha;
  ReferenceFit fit;
  fit.x_mean = c.xm;
  fit.y_mean = c.ym;
  fit.coefficients = g.ldlt().solve(c.xc.transpose() * c.yc);
  return fit;
}

PlainCvResult plain_cv_pls(const Matrix& x, const Matrix& y, int k_max, const FoldPlan& plan) {
  const auto folds = static_cast<int>(plan.size());
  std::vector<double> sums(static_cast<std::size_t>(k_max), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(k_max), 1);
  for (int f = 0; f < folds; ++f) {
    const Fold& fold = plan.folds[static_cast<std::size_t>(f)];
    const CenteredData d = center(take_rows(x, fold.train), take_rows(y, fold.train));
    const Matrix xv = take_rows(x, fold.validation), yv = take_rows(y, fold.validation);
    const Index cap = std::min<Index>(k_max, std::min(d.samples() - 1, d.channels()));
    const PlainSimpls s = plain_simpls(d.xc, d.yc, cap);
    for (int k = 1; k <= k_max; ++k) {
      if (k > s.achieved) {
        if (s.achieved > 0 || k > cap) ok[static_cast<std::size_t>(k - 1)] = 0;
        continue;
      }
      const Matrix b = plain_coefficients(s, k);
      sums[static_cast<std::size_t>(k - 1)] += rmsep(predict_linear(b, d.x_mean, d.y_mean, xv), yv);
    }
    if (s.achieved == 0)
      for (int k = 1; k <= cap; ++k)
        sums[static_cast<std::size_t>(k - 1)] +=
            rmsep(predict_linear(Matrix::Zero(x.cols(), y.cols()), d.x_mean, d.y_mean, xv), yv);
  }
  PlainCvResult out;
  int best = 0;
  for (int k = 1; k <= k_max; ++k) {
    const double v = ok[static_cast<std::size_t>(k - 1)] ? sums[static_cast<std::size_t>(k - 1)] / folds : kNaN;
    out.cv.push_back(v);
    if (!std::isnan(v) && (best == 0 || v < out.cv[static_cast<std::size_t>(best - 1)])) best = k;
  }
  if (best == 0) throw NumericError("plain_cv_pls: no usable component count");
  const CenteredData d = center(x, y);
  const PlainSimpls s = plain_simpls(d.xc, d.yc, best);
  out.components = s.achieved;
  out.coefficients = s.achieved ? plain_coefficients(s, s.achieved)
                                : Matrix::Zero(x.cols(), y.cols());
  out.x_mean = d.x_mean;
  out.y_mean = d.y_mean;
  return out;
}

PlainCvResult plain_cv_ridge(const Matrix& x, const Matrix& y, const std::vector<double>& alphas,
                             const FoldPlan& plan) {
  const auto folds = static_cast<int>(plan.size());
  std::vector<double> sums(alphas.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const Fold& fold = plan.folds[static_cast<std::size_t>(f)];
    const CenteredData d = center(take_rows(x, fold.train), take_rows(y, fold.train));
    const Matrix xcv = take_rows(x, fold.validation).rowwise() - d.x_mean;
    const Matrix yv = take_rows(y, fold.validation);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(d.xc * d.xc.transpose()));
    const Vector lam = es.eigenvalues().cwiseMax(0.0);
    const Matrix proj = es.eigenvectors().transpose() * d.yc;
    const Matrix g = Matrix(xcv * d.xc.transpose()) * es.eigenvectors();
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      const Vector inv = (lam.array() + alphas[a]).inverse();
      sums[a] += rmsep((g * (inv.asDiagonal() * proj)).rowwise() + d.y_mean, yv);
    }
  }
  PlainCvResult out;
  std::size_t best = 0;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out.cv.push_back(sums[a] / folds);
    if (out.cv[a] < out.cv[best]) best = a;
  }
  out.alpha = alphas[best];
  const CenteredData d = center(x, y);
  Matrix k = d.xc * d.xc.transpose();
  k.diagonal().array() += out.alpha;
  const Matrix c = k.llt().solve(d.yc);
  out.coefficients = d.xc.transpose() * c;
  out.x_mean = d.x_mean;
  out.y_mean = d.y_mean;
  return out;
}

ExplicitGridResult explicit_grid_select(const Matrix& x, const Matrix& y, const OperatorBank& bank,
                                        int k_max, const FoldPlan& plan) {
  ExplicitGridResult out;
  const auto nb = static_cast<Index>(bank.size());
  out.cv = Matrix::Zero(nb, k_max);
  const auto folds = static_cast<int>(plan.size());
  for (Index b = 0; b < nb; ++b) {
    const Matrix xt = x * materialise(bank.ops[static_cast<std::size_t>(b)]).transpose();
    for (int k = 1; k <= k_max; ++k)
      for (int f = 0; f < folds; ++f) {
        const Fold& fold = plan.folds[static_cast<std::size_t>(f)];
        const Index cap = std::min<Index>(static_cast<Index>(fold.train.size()) - 1, xt.cols());
        if (k > cap) {
          out.cv(b, k - 1) = kNaN;
          continue;
        }
        const ReferenceFit fit = reference_pls(take_rows(xt, fold.train), take_rows(y, fold.train), k);
        ++out.extractions;
        if (fit.n_components < k) {
          out.cv(b, k - 1) = kNaN;
          continue;
        }
        out.cv(b, k - 1) += rmsep(fit.predict(take_rows(xt, fold.validation)),
                                  take_rows(y, fold.validation)) / folds;
      }
  }
  double best = std::numeric_limits<double>::infinity();
  for (Index b = 0; b < nb; ++b)
    for (int k = 1; k <= k_max; ++k)
      if (out.cv(b, k - 1) < best) {
        best = out.cv(b, k - 1);
        out.chosen_operator = static_cast<std::size_t>(b);
        out.chosen_components = k;
      }
  return out;
}

bool EquivalenceReport::passed() const {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return !rows.empty();
}

double EquivalenceReport::max_discrepancy(const std::string& check) const {
  double m = 0.0;
  for (const auto& r : rows)
    if (r.check == check) m = std::max(m, r.discrepancy);
  return m;
}

std::string EquivalenceReport::text() const {
  std::ostringstream out;
  out << std::left << std::setw(28) << "check" << std::right << std::setw(7) << "config"
      << std::setw(6) << "n" << std::setw(6) << "p" << std::setw(4) << "q" << std::setw(14)
      << "discrepancy" << std::setw(12) << "threshold" << "  result\n";
  out << std::scientific << std::setprecision(3);
  for (const auto& r : rows)
    out << std::left << std::setw(28) << r.check << std::right << std::setw(7) << r.config
        << std::setw(6) << r.n << std::setw(6) << r.p << std::setw(4) << r.q << std::setw(14)
        << r.discrepancy << std::setw(12) << r.threshold << "  " << (r.pass ? "pass" : "FAIL")
        << '\n';
  out << std::fixed << std::setprecision(2) << rows.size() << " rows, "
      << (passed() ? "all pass" : "FAILURES") << ", " << seconds << " s\n";
  return out.str();
}

std::string EquivalenceReport::csv() const {
  std::ostringstream out;
  out.precision(6);
  out << "check,config,n,p,q,discrepancy,threshold,pass\n";
  for (const auto& r : rows)
    out << r.check << ',' << r.config << ',' << r.n << ',' << r.p << ',' << r.q << ','
        << r.discrepancy << ',' << r.threshold << ',' << (r.pass ? 1 : 0) << '\n';
  return out.str();
}

EquivalenceReport equivalence_suite(std::uint64_t seed, int configs, int threads) {
  if (configs < 1) throw ConfigError("equivalence_suite: need at least one configuration");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::vector<EquivalenceRow>> slots(static_cast<std::size_t>(configs));

  parallel_for(static_cast<std::size_t>(configs), threads, [&](std::size_t c) {
    Rng rng = Rng::substream(seed, c);
    const Index n = 20 + static_cast<Index>(rng.below(181));
    const Index p = 30 + static_cast<Index>(rng.below(371));
    const Index q = 1 + static_cast<Index>(rng.below(3));
    const Index n_test = std::max<Index>(5, n / 4);
    const Matrix x_all = smooth_spectra(n + n_test, p, rng);
    Matrix w(p, q);
    for (Index j = 0; j < q; ++j)
      for (Index i = 0; i < p; ++i) w(i, j) = rng.normal() / std::sqrt(static_cast<double>(p));
    Matrix y_all = x_all * w;
    for (Index i = 0; i < y_all.rows(); ++i)
      for (Index j = 0; j < q; ++j) y_all(i, j) += 0.1 * rng.normal();
    const Matrix x = x_all.topRows(n), y = y_all.topRows(n);
    const Matrix x_test = x_all.bottomRows(n_test), y_test = y_all.bottomRows(n_test);
    const CenteredData d = center(x, y);
    const Matrix s = cross_covariance(d);
    const Index k = std::min<Index>(6, n - 2);
    const OperatorBank bank = compact_bank(p);

    double identity = 0, nipals = 0, folded = 0, ridge = 0;
    const CenteredData d1 = center(x, y.leftCols(1));
    const Matrix s1 = cross_covariance(d1);
    for (const LinOp& op : bank.ops) {
      const Matrix a = materialise(op);
      const Matrix xt = x * a.transpose();
      const Matrix xct = d.xc * a.transpose();
      identity = std::max(identity, rel(apply_forward(op, s), xct.transpose() * d.yc));

      const PlsFit fast = simpls_extract(s, d, op, k);
      const ReferenceFit ref = reference_pls(xt, y, k);
      folded = std::max(folded, rel(fast.coefficients, a.transpose() * ref.coefficients));
      folded = std::max(folded, rel(predict(fast, x_test), ref.predict(x_test * a.transpose())));

      const PlsFit s_fit = simpls_extract(s1, d1, op, k);
      const PlsFit n_fit = nipals_adjoint_extract(d1, op, k);
      const double r_s = rmsep(predict(s_fit, x_test), y_test.leftCols(1));
      const double r_n = rmsep(predict(n_fit, x_test), y_test.leftCols(1));
      nipals = std::max(nipals, std::abs(r_s - r_n) / std::max(1.0, r_s));

      const Matrix kb = operator_kernel(d, op);
      const double alpha = 1e-3 * kb.trace() / static_cast<double>(n) + 1e-12;
      const Matrix beta = ridge_coefficients(op, d, dual_solve(kb, alpha, d.yc));
      const ReferenceFit primal = reference_ridge(xt, y, alpha);
      ridge = std::max(ridge, rel(beta, a.transpose() * primal.coefficients));
    }
    auto row = [&](const char* check, double v, double thr) {
      return EquivalenceRow{check, static_cast<int>(c), n, p, q, v, thr, v <= thr};
    };
    slots[c] = {row(kCheckIdentity, identity, kIdentityThreshold),
                row(kCheckNipals, nipals, kNipalsThreshold),
                row(kCheckFolded, folded, kFoldedThreshold),
                row(kCheckRidge, ridge, kRidgeThreshold)};
  });

  EquivalenceReport report;
  for (auto& s : slots) report.rows.insert(report.rows.end(), s.begin(), s.end());
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace aomcal
