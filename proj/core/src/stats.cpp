#include "aomcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "aomcal/error.hpp"
#include "aomcal/rng.hpp"

namespace aomcal {

namespace {

std::vector<Index> complement(Index n, const std::vector<Index>& chosen) {
  std::vector<char> mark(static_cast<std::size_t>(n), 0);
  for (Index i : chosen) mark[static_cast<std::size_t>(i)] = 1;
  std::vector<Index> rest;
  for (Index i = 0; i < n; ++i)
    if (!mark[static_cast<std::size_t>(i)]) rest.push_back(i);
  return rest;
}

Matrix pairwise_distances(const Matrix& m) {
  const Index n = m.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (m.row(i) - m.row(j)).norm();
  return d;
}

// Kennard-Stone max-min selection of `quota` rows from `pool` under distance d.
std::vector<Index> max_min_select(const Matrix& d, const std::vector<Index>& pool, Index quota) {
  std::vector<Index> chosen;
  if (quota <= 0 || pool.empty()) return chosen;
  if (static_cast<Index>(pool.size()) <= quota) return pool;
  if (quota == 1) return {pool.front()};
  Index best_i = pool[0], best_j = pool[1];
  double best = -1.0;
  for (std::size_t a = 0; a < pool.size(); ++a)
    for (std::size_t b = a + 1; b < pool.size(); ++b)
      if (d(pool[a], pool[b]) > best) {
        best = d(pool[a], pool[b]);
        best_i = pool[a];
        best_j = pool[b];
      }
  chosen = {best_i, best_j};
  std::vector<double> mindist(pool.size());
  std::vector<char> used(pool.size(), 0);
  for (std::size_t a = 0; a < pool.size(); ++a) {
    mindist[a] = std::min(d(pool[a], best_i), d(pool[a], best_j));
    used[a] = pool[a] == best_i || pool[a] == best_j;
  }
  while (static_cast<Index>(chosen.size()) < quota) {
    std::size_t pick = pool.size();
    for (std::size_t a = 0; a < pool.size(); ++a)
      if (!used[a] && (pick == pool.size() || mindist[a] > mindist[pick])) pick = a;
    used[pick] = 1;
    chosen.push_back(pool[pick]);
    for (std::size_t a = 0; a < pool.size(); ++a)
      mindist[a] = std::min(mindist[a], d(pool[a], pool[pick]));
  }
  return chosen;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

FoldPlan kfold_plan(Index n, int k, std::uint64_t seed, const std::vector<int>* labels) {
  if (k < 2) throw ConfigError("kfold_plan: need at least 2 folds");
  if (k > n) throw ConfigError("kfold_plan: " + std::to_string(k) + " folds for " +
                               std::to_string(n) + " samples");
  FoldPlan plan;
  plan.seed = seed;
  plan.stratified = labels != nullptr;
  std::vector<std::vector<Index>> validation(static_cast<std::size_t>(k));
  Rng rng(seed);

  if (!labels) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    const Index base = n / k, extra = n % k;
    Index pos = 0;
    for (int f = 0; f < k; ++f) {
      const Index len = base + (f < extra ? 1 : 0);
      validation[static_cast<std::size_t>(f)].assign(order.begin() + pos, order.begin() + pos + len);
      pos += len;
    }
  } else {
    if (static_cast<Index>(labels->size()) != n)
      throw DimensionError("kfold_plan: label count does not match sample count");
    std::map<int, std::vector<Index>> by_class;
    for (Index i = 0; i < n; ++i) by_class[(*labels)[static_cast<std::size_t>(i)]].push_back(i);
    std::size_t offset = 0;
    for (auto& [cls, members] : by_class) {
      if (static_cast<Index>(members.size()) < k)
        throw DataError("kfold_plan: class " + std::to_string(cls) + " has " +
                        std::to_string(members.size()) + " members, fewer than " +
                        std::to_string(k) + " folds");
      rng.shuffle(members);
      for (std::size_t j = 0; j < members.size(); ++j)
        validation[(offset + j) % static_cast<std::size_t>(k)].push_back(members[j]);
      offset = (offset + members.size()) % static_cast<std::size_t>(k);
    }
  }

  for (auto& v : validation) {
    std::sort(v.begin(), v.end());
    plan.folds.push_back(Fold{complement(n, v), v});
  }
  return plan;
}

Split spxy_split(const Matrix& x, const Matrix& y, double test_fraction) {
  const Index n = x.rows();
  if (y.rows() != n) throw DimensionError("spxy_split: X and y row counts differ");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("spxy_split: test fraction must lie in (0, 1)");
  if (n < 3) throw DataError("spxy_split: need at least 3 samples");
  const Index n_test =
      std::clamp<Index>(static_cast<Index>(std::llround(test_fraction * static_cast<double>(n))), 1,
                        n - 2);
  const Index n_train = n - n_test;

  Matrix dx = pairwise_distances(x);
  Matrix dy = pairwise_distances(y);
  const double mx = dx.maxCoeff(), my = dy.maxCoeff();
  Matrix d = Matrix::Zero(n, n);
  if (mx > 0) d += dx / mx;
  if (my > 0) d += dy / my;

  Split split;
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  if (d.maxCoeff() == 0.0) {
    split.fallback = true;
    split.train.assign(pool.begin(), pool.begin() + n_train);
  } else {
    split.train = max_min_select(d, pool, n_train);
  }
  std::sort(split.train.begin(), split.train.end());
  split.test = complement(n, split.train);
  return split;
}

Split stratified_spxy_split(const Matrix& x, const std::vector<int>& labels,
                            double test_fraction) {
  const Index n = x.rows();
  if (static_cast<Index>(labels.size()) != n)
    throw DimensionError("stratified_spxy_split: label count does not match sample count");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("stratified_spxy_split: test fraction must lie in (0, 1)");
  const Matrix dx = pairwise_distances(x);
  std::map<int, std::vector<Index>> by_class;
  for (Index i = 0; i < n; ++i) by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
  Split split;
  for (const auto& [cls, members] : by_class) {
    const auto nc = static_cast<Index>(members.size());
    Index n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(nc)));
    n_test = std::clamp<Index>(n_test, nc >= 2 ? 1 : 0, std::max<Index>(nc - 1, 0));
    auto train = max_min_select(dx, members, nc - n_test);
    split.train.insert(split.train.end(), train.begin(), train.end());
  }
  std::sort(split.train.begin(), split.train.end());
  split.test = complement(n, split.train);
  return split;
}

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

double rmsep(const Matrix& yhat, const Matrix& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols())
    throw DimensionError("rmsep: shape mismatch");
  if (y.size() == 0) throw DataError("rmsep: empty input");
  return std::sqrt((yhat - y).squaredNorm() / static_cast<double>(y.size()));
}

double balanced_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                         const std::vector<int>& classes) {
  if (pred.size() != truth.size()) throw DimensionError("balanced_accuracy: length mismatch");
  if (classes.empty()) throw DataError("balanced_accuracy: no classes");
  double total = 0.0;
  for (int c : classes) {
    std::size_t members = 0, hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != c) continue;
      ++members;
      hits += pred[i] == c;
    }
    if (members == 0)
      throw DataError("balanced_accuracy: class " + std::to_string(c) + " never observed in truth");
    total += static_cast<double>(hits) / static_cast<double>(members);
  }
  return total / static_cast<double>(classes.size());
}

double balanced_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  const std::set<int> observed(truth.begin(), truth.end());
  return balanced_accuracy(pred, truth, std::vector<int>(observed.begin(), observed.end()));
}

WilcoxonResult wilcoxon_signed_rank_less(const std::vector<double>& differences) {
  std::vector<double> nz;
  for (double d : differences)
    if (d != 0.0) nz.push_back(d);
  WilcoxonResult out;
  const std::size_t n = nz.size();
  out.n_nonzero = static_cast<Index>(n);
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  // Doubled average ranks stay integral under ties.
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const long r2 = static_cast<long>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) w2 += rank2[i];
  out.w_plus = static_cast<double>(w2) / 2.0;

  if (n <= 25) {
    long total2 = 0;
    for (long r : rank2) total2 += r;
    std::vector<double> count(static_cast<std::size_t>(total2 + 1), 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (long r : rank2) {
      for (long s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)] != 0.0)
          count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      reach += r;
    }
    double below = 0.0;
    for (long s = 0; s <= w2; ++s) below += count[static_cast<std::size_t>(s)];
    out.p_less = below / std::ldexp(1.0, static_cast<int>(n));
    out.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    out.p_less = var > 0 ? normal_cdf((out.w_plus - mean + 0.5) / std::sqrt(var)) : 1.0;
    out.exact = false;
  }
  out.p_less = std::min(1.0, out.p_less);
  return out;
}

std::vector<double> holm_adjust(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double v = std::min(1.0, static_cast<double>(m - k) * p_values[order[k]]);
    running = std::max(running, v);
    adjusted[order[k]] = running;
  }
  return adjusted;
}

PairedSummary paired_summary(const std::vector<double>& a, const std::vector<double>& b,
                             int bootstrap_n, std::uint64_t seed) {
  if (a.size() != b.size()) throw DimensionError("paired_summary: length mismatch");
  if (a.empty()) throw DataError("paired_summary: no pairs");
  const std::size_t n = a.size();
  std::vector<double> ratios(n), logs(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0) || !(b[i] > 0.0))
      throw DataError("paired_summary: ratio mode needs positive metrics (pair " +
                      std::to_string(i) + ")");
    ratios[i] = a[i] / b[i];
    logs[i] = std::log(a[i]) - std::log(b[i]);
  }
  PairedSummary s;
  s.n = static_cast<Index>(n);
  s.median_ratio = median_of(ratios);
  s.wins = static_cast<Index>(std::count_if(ratios.begin(), ratios.end(),
                                            [](double r) { return r < 1.0; }));

  Rng rng(seed);
  std::vector<double> medians(static_cast<std::size_t>(std::max(bootstrap_n, 1)));
  std::vector<double> sample(n);
  for (auto& m : medians) {
    for (std::size_t i = 0; i < n; ++i) sample[i] = ratios[static_cast<std::size_t>(rng.below(n))];
    m = median_of(sample);
  }
  std::sort(medians.begin(), medians.end());
  // Percentile interval, widened if needed to contain the point estimate.
  s.ci_lo = std::min(quantile_sorted(medians, 0.025), s.median_ratio);
  s.ci_hi = std::max(quantile_sorted(medians, 0.975), s.median_ratio);

  s.p_one_sided = wilcoxon_signed_rank_less(logs).p_less;
  s.p_holm = s.p_one_sided;
  return s;
}

void apply_holm(std::vector<PairedSummary>& family) {
  std::vector<double> p;
  for (const auto& s : family) p.push_back(s.p_one_sided);
  const auto adj = holm_adjust(p);
  for (std::size_t i = 0; i < family.size(); ++i) family[i].p_holm = adj[i];
}

std::string summary_table_csv(const std::vector<PairedSummary>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "comparison,N,median_ratio,ci_lo,ci_hi,wins,p_one_sided,p_holm\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.n << ',' << r.median_ratio << ',' << r.ci_lo << ',' << r.ci_hi
        << ',' << r.wins << ',' << r.p_one_sided << ',' << r.p_holm << '\n';
  return out.str();
}

double winner_bias(double candidates, double sigma, double n_holdout) {
  if (candidates < 2 || !(sigma > 0) || n_holdout < 1)
    throw ConfigError("winner_bias: need B >= 2, sigma > 0, n_holdout >= 1");
  return sigma / std::sqrt(n_holdout) * std::sqrt(2.0 * std::log(candidates));
}

Matrix operator_gram(const OperatorBank& bank, const Matrix& s) {
  const auto b = static_cast<Index>(bank.size());
  std::vector<Matrix> screened;
  screened.reserve(bank.size());
  for (const auto& op : bank.ops) screened.push_back(apply_forward(op, s));
  Matrix g(b, b);
  for (Index i = 0; i < b; ++i)
    for (Index j = i; j < b; ++j)
      g(i, j) = g(j, i) = screened[static_cast<std::size_t>(i)]
                              .cwiseProduct(screened[static_cast<std::size_t>(j)])
                              .sum();
  return g;
}

VertexReport vertex_check(const Matrix& gram, int sample_count, std::uint64_t seed) {
  if (gram.rows() == 0 || gram.rows() != gram.cols())
    throw ConfigError("vertex_check: need a nonempty square Gram matrix");
  VertexReport r;
  r.vertex_max = gram.diagonal().maxCoeff();
  r.best_interior = -std::numeric_limits<double>::infinity();
  Rng rng(seed);
  Vector alpha(gram.rows());
  for (int s = 0; s < sample_count; ++s) {
    // Flat Dirichlet via normalised exponentials.
    for (Index i = 0; i < alpha.size(); ++i) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      alpha(i) = -std::log(u);
    }
    alpha /= alpha.sum();
    r.best_interior = std::max(r.best_interior, alpha.dot(gram * alpha));
  }
  r.holds = r.vertex_max >= r.best_interior - 1e-9 * std::max(1.0, std::abs(r.vertex_max));
  return r;
}

VertexReport vertex_check(const OperatorBank& bank, const Matrix& s, int sample_count,
                          std::uint64_t seed) {
  if (bank.size() == 0) throw ConfigError("vertex_check: empty bank");
  return vertex_check(operator_gram(bank, s), sample_count, seed);
}

}  // namespace aomcal
