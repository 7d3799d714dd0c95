#include "aomcal/fastaom.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aomcal/error.hpp"
#include "aomcal/parallel.hpp"
#include "aomcal/rng.hpp"

namespace aomcal {

namespace {

Matrix orthonormal_basis(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

}  // namespace

std::vector<Chain> enumerate_chains(const OperatorBank& bank, int depth) {
  if (depth < 1) throw ConfigError("enumerate_chains: depth must be >= 1");
  if (bank.size() == 0 || !bank.ops[0].is_identity())
    throw ConfigError("enumerate_chains: bank index 0 must be the identity");
  std::vector<std::size_t> members;
  for (std::size_t b = 1; b < bank.size(); ++b)
    if (!bank.ops[b].is_identity()) members.push_back(b);
  std::vector<Chain> out = {{0}};
  // Length-major order: all singletons, then all pairs, and so on.
  std::vector<Chain> level = {{}};
  for (int len = 1; len <= depth; ++len) {
    std::vector<Chain> next;
    for (const Chain& c : level)
      for (std::size_t b : members) {
        Chain e = c;
        e.push_back(b);
        next.push_back(std::move(e));
      }
    out.insert(out.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return out;
}

LinOp chain_operator(const OperatorBank& bank, const Chain& chain) {
  if (chain.empty()) throw ConfigError("chain_operator: empty chain");
  std::vector<LinOp> ops;
  for (std::size_t b : chain) {
    if (b >= bank.size()) throw ConfigError("chain_operator: index outside the bank");
    ops.push_back(bank.ops[b]);
  }
  return ops.size() == 1 ? ops.front() : compose(ops);
}

std::string chain_name(const OperatorBank& bank, const Chain& chain) {
  std::string s;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) s += " * ";
    s += bank.names.at(chain[i]);
  }
  return s;
}

TruncatedSvd truncated_svd(const Matrix& m, Index rank, std::uint64_t seed, double tol,
                           int max_iter) {
  const Index n = m.rows(), p = m.cols();
  if (rank < 1 || rank > std::min(n, p))
    throw ConfigError("truncated_svd: rank " + std::to_string(rank) + " outside [1, " +
                      std::to_string(std::min(n, p)) + "]");
  const Index l = std::min(std::min(n, p), rank + std::max<Index>(10, rank / 2));
  Rng rng(seed);
  Matrix omega(p, l);
  for (Index j = 0; j < l; ++j)
    for (Index i = 0; i < p; ++i) omega(i, j) = rng.normal();
  Matrix q = orthonormal_basis(m * omega);

  TruncatedSvd out;
  double residual = 0;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix z = orthonormal_basis(m.transpose() * q);
    q = orthonormal_basis(m * z);
    const Matrix b = q.transpose() * m;  // l x p
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = q * svd.matrixU().leftCols(rank);
    out.sigma = svd.singularValues().head(rank);
    out.v = svd.matrixV().leftCols(rank);
    out.iterations = it;
    const double s1 = out.sigma(0);
    if (s1 == 0.0) {
      out.residual = 0.0;
      return out;
    }
    residual = (m * out.v - out.u * out.sigma.asDiagonal()).norm() / s1;
    const double adjoint = (m.transpose() * out.u - out.v * out.sigma.asDiagonal()).norm() / s1;
    residual = std::max(residual, adjoint);
    out.residual = residual;
    if (residual <= tol) return out;
  }
  std::ostringstream msg;
  msg << "truncated_svd: residual " << residual << " above " << tol << " after " << max_iter
      << " iterations (rank " << rank << ", " << n << " x " << p << ")";
  throw NumericError(msg.str());
}

ChainScore chain_score(const LinOp& chain_op, const TruncatedSvd& base, const Vector& xty,
                       double y_norm) {
  ChainScore s;
  if (y_norm == 0.0) {
    s.zero_response = true;
    return s;
  }
  const double num = apply_forward(chain_op, xty).squaredNorm();
  const Matrix av = apply_forward(chain_op, base.v);
  double den = 0.0;
  for (Index i = 0; i < base.sigma.size(); ++i)
    den += base.sigma(i) * base.sigma(i) * av.col(i).squaredNorm();
  den *= y_norm * y_norm;
  s.raw = den > 0.0 ? num / den : 0.0;
  s.score = std::clamp(s.raw, 0.0, 1.0);
  s.clamped = s.raw != s.score;
  return s;
}

std::vector<ChainCandidate> score_chains(const OperatorBank& bank, const std::vector<Chain>& chains,
                                         const TruncatedSvd& base, const Vector& xty,
                                         double y_norm, int threads) {
  std::vector<ChainCandidate> out(chains.size());
  parallel_for(chains.size(), threads, [&](std::size_t i) {
    const ChainScore s = chain_score(chain_operator(bank, chains[i]), base, xty, y_norm);
    out[i].chain = chains[i];
    out[i].name = chain_name(bank, chains[i]);
    out[i].score = s.score;
    out[i].raw_score = s.raw;
    out[i].clamped = s.clamped;
  });
  return out;
}

NnlsResult nnls(const Matrix& m, const Vector& b, int max_iter) {
  const Index k = m.cols();
  if (m.rows() != b.size()) throw DimensionError("nnls: M and b row counts differ");
  if (!m.allFinite() || !b.allFinite()) throw DataError("nnls: non-finite input");
  if (max_iter <= 0) max_iter = static_cast<int>(30 * std::max<Index>(k, 1));
  NnlsResult r;
  r.w = Vector::Zero(k);
  std::vector<char> passive(static_cast<std::size_t>(k), 0);
  const double tol = 1e-13 * std::max(1.0, m.norm() * b.norm());

  auto solve_passive = [&]() {
    std::vector<Index> idx;
    for (Index j = 0; j < k; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Matrix sub(m.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Index>(c)) = m.col(idx[c]);
    const Vector sol = sub.colPivHouseholderQr().solve(b);
    Vector s = Vector::Zero(k);
    for (std::size_t c = 0; c < idx.size(); ++c) s(idx[c]) = sol(static_cast<Index>(c));
    return s;
  };

  while (true) {
    const Vector wd = m.transpose() * (b - m * r.w);
    Index t = -1;
    double best = tol;
    for (Index j = 0; j < k; ++j)
      if (!passive[static_cast<std::size_t>(j)] && wd(j) > best) {
        best = wd(j);
        t = j;
      }
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = 1;
    while (true) {
      if (++r.iterations > max_iter)
        throw NumericError("nnls: iteration cap " + std::to_string(max_iter) + " exceeded");
      const Vector s = solve_passive();
      double alpha = 1.0;
      bool feasible = true;
      for (Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          feasible = false;
          alpha = std::min(alpha, r.w(j) / (r.w(j) - s(j)));
        }
      if (feasible) {
        r.w = s;
        break;
      }
      r.w += alpha * (s - r.w);
      for (Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)] && r.w(j) <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = 0;
          r.w(j) = 0.0;
        }
    }
  }
  r.kkt = nnls_kkt_residual(m, b, r.w);
  return r;
}

double nnls_kkt_residual(const Matrix& m, const Vector& b, const Vector& w) {
  const Vector g = m.transpose() * (m * w - b);
  double res = 0.0;
  for (Index i = 0; i < w.size(); ++i) res = std::max(res, std::abs(std::min(w(i), g(i))));
  res += std::max(0.0, -w.minCoeff());
  const double scale = std::max(1.0, (m.transpose() * b).cwiseAbs().maxCoeff());
  return res / scale;
}

std::string FastAomFit::survivor_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "chain,score,weight\n";
  for (const auto& s : survivors) out << '"' << s.name << "\"," << s.score << ',' << s.weight << '\n';
  return out.str();
}

FastAomFit fit_fastaom(const Matrix& x, const Matrix& y, const FastAomConfig& cfg) {
  if (y.cols() != 1) throw ConfigError("fit_fastaom: single response required, got " +
                                       std::to_string(y.cols()) + " columns");
  if (cfg.top_m < 1) throw ConfigError("fit_fastaom: top_m must be >= 1");
  if (x.rows() < cfg.folds)
    throw ConfigError("fit_fastaom: " + std::to_string(x.rows()) + " samples for " +
                      std::to_string(cfg.folds) + " folds");
  const CenteredData d = center(x, y);
  const Index n = d.samples(), p = d.channels();
  FastAomFit fit;
  fit.x_mean = d.x_mean;
  fit.y_mean = d.y_mean;

  // Screening on the training cross-covariance.
  const Vector xty = cross_covariance(d).col(0);
  const Index rank = cfg.svd_rank > 0 ? std::min({cfg.svd_rank, n, p})
                                      : std::min<Index>({n, p, 100});
  const TruncatedSvd base = truncated_svd(d.xc, rank, cfg.seed, 1e-6);
  const std::vector<Chain> chains = enumerate_chains(cfg.bank, cfg.depth);
  std::vector<ChainCandidate> scored =
      score_chains(cfg.bank, chains, base, xty, d.yc.norm(), cfg.threads);
  fit.chains_scored = scored.size();
  for (const auto& c : scored) fit.clamp_events += c.clamped;
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ChainCandidate& a, const ChainCandidate& b) { return a.score > b.score; });
  const auto m = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_m), scored.size());
  fit.survivors.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(m));

  std::vector<LinOp> ops;
  for (const auto& s : fit.survivors) ops.push_back(chain_operator(cfg.bank, s.chain));

  // Out-of-fold single-component predictions, one column per survivor.
  const FoldPlan plan = kfold_plan(n, cfg.folds, cfg.seed);
  Matrix oof = Matrix::Zero(n, static_cast<Index>(m));
  for (const Fold& fold : plan.folds) {
    const CenteredData dt = center(take_rows(x, fold.train), take_rows(y, fold.train));
    const Matrix st = cross_covariance(dt);
    const Matrix xv = take_rows(x, fold.validation);
    for (std::size_t s = 0; s < m; ++s) {
      const Matrix pred = predict(simpls_extract(st, dt, ops[s], 1), xv);
      for (std::size_t r = 0; r < fold.validation.size(); ++r)
        oof(fold.validation[r], static_cast<Index>(s)) = pred(static_cast<Index>(r), 0);
    }
  }
  const double ym = d.y_mean(0);
  const NnlsResult nr = nnls(oof.array() - ym, d.yc.col(0));
  fit.weights = nr.w;
  Vector wn = nr.w;
  if (wn.sum() <= 0.0) {
    wn.setZero();
    wn(0) = 1.0;
  }
  wn /= wn.sum();
  std::vector<LinOp> used;
  std::vector<double> used_w;
  for (std::size_t s = 0; s < m; ++s) {
    fit.survivors[s].weight = wn(static_cast<Index>(s));
    if (wn(static_cast<Index>(s)) > 0.0) {
      used.push_back(ops[s]);
      used_w.push_back(wn(static_cast<Index>(s)));
    }
  }
  fit.mixed = linear_combination(used, used_w);

  // PLS on the blended operator with CV-chosen K.
  AomPlsConfig pc;
  pc.bank.ops = {fit.mixed};
  pc.bank.names = {fit.mixed.name()};
  pc.k_max = cfg.k_max;
  pc.folds = cfg.folds;
  pc.seed = cfg.seed;
  pc.threads = cfg.threads;
  AomPlsFit pls = fit_aom_pls(x, y, pc, plan);
  fit.pls_stage = std::move(pls.pls);
  fit.pls_selection = std::move(pls.selection);

  // Small ridge on the unnormalised PLS scores.
  const Matrix& z = fit.pls_stage.z;
  if (z.cols() == 0) {
    fit.gamma = Vector(0);
    fit.coefficients = Matrix::Zero(p, 1);
    return fit;
  }
  const Matrix t = d.xc * z;
  fit.ridge_alpha = 1e-6 * t.squaredNorm() / static_cast<double>(n);
  Matrix g = t.transpose() * t;
  g.diagonal().array() += fit.ridge_alpha;
  fit.gamma = g.ldlt().solve(t.transpose() * d.yc.col(0));
  fit.coefficients = z * fit.gamma;
  return fit;
}

Matrix predict(const FastAomFit& fit, const Matrix& xnew) {
  return predict_linear(fit.coefficients, fit.x_mean, fit.y_mean, xnew);
}

Matrix predict_staged(const FastAomFit& fit, const Matrix& xnew) {
  if (xnew.cols() != fit.x_mean.size())
    throw DimensionError("predict_staged: expected " + std::to_string(fit.x_mean.size()) +
                         " columns, got " + std::to_string(xnew.cols()));
  Matrix out(xnew.rows(), 1);
  if (fit.gamma.size() == 0) {
    out.setConstant(fit.y_mean(0));
    return out;
  }
  const Matrix scores = (xnew.rowwise() - fit.x_mean) * fit.pls_stage.z;
  out.col(0) = (scores * fit.gamma).array() + fit.y_mean(0);
  return out;
}

}  // namespace aomcal
