#include "aomcal/operators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>

#include "aomcal/error.hpp"

namespace aomcal {

namespace {

using Factor = LinOp::Factor;
using FactorPtr = std::shared_ptr<const Factor>;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Least-squares polynomial fit of degree `order` over local coordinates
// t = shift, ..., shift + window - 1; returns the weights giving the
// `deriv`-th derivative of the fit at t = 0.
std::vector<double> savgol_weights(int window, int order, int deriv, int shift) {
  Matrix vander(window, order + 1);
  for (int r = 0; r < window; ++r) {
    const double t = static_cast<double>(shift + r);
    double power = 1.0;
    for (int c = 0; c <= order; ++c) {
      vander(r, c) = power;
      power *= t;
    }
  }
  const Matrix pinv = vander.householderQr().solve(Matrix::Identity(window, window));
  std::vector<double> w(static_cast<std::size_t>(window));
  const double scale = factorial(deriv);
  for (int r = 0; r < window; ++r) w[static_cast<std::size_t>(r)] = scale * pinv(deriv, r);
  return w;
}

// Edge rows use a full-length window shifted inside [0, p), so every row is an
// exact least-squares fit and polynomials up to `order` are reproduced.
FactorPtr savgol_factor(Index p, int window, int order, int deriv) {
  auto f = std::make_shared<Factor>();
  const Index half = (window - 1) / 2;
  f->start.resize(static_cast<std::size_t>(p));
  f->offset.resize(static_cast<std::size_t>(p + 1));
  f->coeffs.reserve(static_cast<std::size_t>(p * window));
  std::vector<std::vector<double>> cache(static_cast<std::size_t>(window));
  for (Index i = 0; i < p; ++i) {
    const Index a = std::clamp<Index>(i - half, 0, p - window);
    const int shift = static_cast<int>(a - i);  // in [-(window-1), 0]
    auto& weights = cache[static_cast<std::size_t>(-shift)];
    if (weights.empty()) weights = savgol_weights(window, order, deriv, shift);
    f->start[static_cast<std::size_t>(i)] = a;
    f->offset[static_cast<std::size_t>(i)] = static_cast<Index>(f->coeffs.size());
    f->coeffs.insert(f->coeffs.end(), weights.begin(), weights.end());
  }
  f->offset[static_cast<std::size_t>(p)] = static_cast<Index>(f->coeffs.size());
  return f;
}

FactorPtr finite_diff_factor(Index p) {
  auto f = std::make_shared<Factor>();
  f->start.resize(static_cast<std::size_t>(p));
  f->offset.resize(static_cast<std::size_t>(p + 1));
  f->start[0] = 0;
  f->offset[0] = 0;
  for (Index i = 1; i < p; ++i) {
    f->start[static_cast<std::size_t>(i)] = i - 1;
    f->offset[static_cast<std::size_t>(i)] = static_cast<Index>(f->coeffs.size());
    f->coeffs.push_back(-1.0);
    f->coeffs.push_back(1.0);
  }
  f->offset[static_cast<std::size_t>(p)] = static_cast<Index>(f->coeffs.size());
  return f;
}

// I - Q Q^T with Q an orthonormal basis of the degree-d monomials on the
// channel index (rescaled to [-1, 1] for conditioning; the span is unchanged).
FactorPtr detrend_factor(Index p, int degree) {
  auto f = std::make_shared<Factor>();
  f->start.resize(static_cast<std::size_t>(p));
  f->offset.resize(static_cast<std::size_t>(p + 1));
  for (Index i = 0; i < p; ++i) {
    f->start[static_cast<std::size_t>(i)] = i;
    f->offset[static_cast<std::size_t>(i)] = i;
    f->coeffs.push_back(1.0);
  }
  f->offset[static_cast<std::size_t>(p)] = p;

  Matrix vander(p, degree + 1);
  for (Index j = 0; j < p; ++j) {
    const double s = p > 1 ? 2.0 * static_cast<double>(j) / static_cast<double>(p - 1) - 1.0 : 0.0;
    double power = 1.0;
    for (int c = 0; c <= degree; ++c) {
      vander(j, c) = power;
      power *= s;
    }
  }
  Eigen::HouseholderQR<Matrix> qr(vander);
  Matrix q = qr.householderQ() * Matrix::Identity(p, degree + 1);
  f->lowrank_m = q.transpose();
  f->lowrank_v = std::move(q);
  return f;
}

FactorPtr nw_gap_factor(Index p, int gap, int segment) {
  auto f = std::make_shared<Factor>();
  const Index half = (segment - 1) / 2;
  const Index reach = gap + half;
  f->start.resize(static_cast<std::size_t>(p));
  f->offset.resize(static_cast<std::size_t>(p + 1));
  const double w = 1.0 / static_cast<double>(segment);
  for (Index i = 0; i < p; ++i) {
    f->offset[static_cast<std::size_t>(i)] = static_cast<Index>(f->coeffs.size());
    if (i - reach < 0 || i + reach > p - 1) {
      f->start[static_cast<std::size_t>(i)] = 0;  // zero row
      continue;
    }
    f->start[static_cast<std::size_t>(i)] = i - reach;
    std::vector<double> run(static_cast<std::size_t>(2 * reach + 1), 0.0);
    for (Index k = 0; k < segment; ++k) {
      run[static_cast<std::size_t>(k)] -= w;                   // centred at i - gap
      run[static_cast<std::size_t>(2 * gap + k)] += w;         // centred at i + gap
    }
    f->coeffs.insert(f->coeffs.end(), run.begin(), run.end());
  }
  f->offset[static_cast<std::size_t>(p)] = static_cast<Index>(f->coeffs.size());
  return f;
}

void check_rows(const LinOp& op, Index rows, const char* what) {
  if (rows != op.size())
    throw DimensionError(std::string(what) + ": expected " + std::to_string(op.size()) +
                         " rows, got " + std::to_string(rows));
}

Matrix factor_forward(const Factor& f, const Matrix& m) {
  const Index p = m.rows();
  Matrix out(p, m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    const double* src = m.col(j).data();
    double* dst = out.col(j).data();
    for (Index i = 0; i < p; ++i) {
      const Index begin = f.offset[static_cast<std::size_t>(i)];
      const Index end = f.offset[static_cast<std::size_t>(i + 1)];
      const double* x = src + f.start[static_cast<std::size_t>(i)];
      double s = 0.0;
      for (Index k = begin; k < end; ++k) s += f.coeffs[static_cast<std::size_t>(k)] * x[k - begin];
      dst[i] = s;
    }
  }
  if (f.lowrank_v.size() > 0) out.noalias() -= f.lowrank_v * (f.lowrank_m * m);
  return out;
}

Matrix factor_adjoint(const Factor& f, const Matrix& m) {
  const Index p = m.rows();
  Matrix out = Matrix::Zero(p, m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    const double* src = m.col(j).data();
    double* dst = out.col(j).data();
    for (Index i = 0; i < p; ++i) {
      const Index begin = f.offset[static_cast<std::size_t>(i)];
      const Index end = f.offset[static_cast<std::size_t>(i + 1)];
      double* y = dst + f.start[static_cast<std::size_t>(i)];
      const double v = src[i];
      for (Index k = begin; k < end; ++k) y[k - begin] += f.coeffs[static_cast<std::size_t>(k)] * v;
    }
  }
  if (f.lowrank_v.size() > 0)
    out.noalias() -= f.lowrank_m.transpose() * (f.lowrank_v.transpose() * m);
  return out;
}

Matrix factor_rows(const Factor& f, const Matrix& x) {
  const Index p = x.cols();
  Matrix out(x.rows(), p);
  for (Index i = 0; i < p; ++i) {
    const Index begin = f.offset[static_cast<std::size_t>(i)];
    const Index end = f.offset[static_cast<std::size_t>(i + 1)];
    const Index start = f.start[static_cast<std::size_t>(i)];
    auto col = out.col(i);
    col.setZero();
    for (Index k = begin; k < end; ++k)
      col += f.coeffs[static_cast<std::size_t>(k)] * x.col(start + (k - begin));
  }
  if (f.lowrank_v.size() > 0)
    out.noalias() -= (x * f.lowrank_m.transpose()) * f.lowrank_v.transpose();
  return out;
}

Matrix dense_factor(const Factor& f, Index p) {
  Matrix d = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    const Index begin = f.offset[static_cast<std::size_t>(i)];
    const Index end = f.offset[static_cast<std::size_t>(i + 1)];
    for (Index k = begin; k < end; ++k)
      d(i, f.start[static_cast<std::size_t>(i)] + (k - begin)) = f.coeffs[static_cast<std::size_t>(k)];
  }
  if (f.lowrank_v.size() > 0) d.noalias() -= f.lowrank_v * f.lowrank_m;
  return d;
}

template <typename Step>
Matrix apply_terms(const LinOp& op, const Matrix& m, bool reverse_factors, Step step) {
  Matrix total;
  bool first = true;
  for (const auto& term : op.terms()) {
    Matrix current = m;
    const auto& fs = term.factors;
    if (reverse_factors) {
      for (auto it = fs.rbegin(); it != fs.rend(); ++it) current = step(**it, current);
    } else {
      for (const auto& f : fs) current = step(*f, current);
    }
    if (term.weight != 1.0) current *= term.weight;
    if (first) {
      total = std::move(current);
      first = false;
    } else {
      total += current;
    }
  }
  if (first) total = Matrix::Zero(m.rows(), m.cols());
  return total;
}

}  // namespace

LinOp::LinOp(Index p) : p_(p), terms_{Term{}}, name_("identity"), spec_(OperatorSpec::identity()) {}

LinOp::LinOp(Index p, std::vector<Term> terms, std::string name, std::optional<OperatorSpec> spec)
    : p_(p), terms_(std::move(terms)), name_(std::move(name)), spec_(std::move(spec)) {}

bool LinOp::is_identity() const noexcept {
  return terms_.size() == 1 && terms_.front().factors.empty() && terms_.front().weight == 1.0;
}

Index LinOp::bandwidth() const noexcept {
  Index bw = terms_.empty() ? 0 : 1;
  for (const auto& t : terms_)
    for (const auto& f : t.factors)
      for (std::size_t i = 0; i + 1 < f->offset.size(); ++i)
        bw = std::max(bw, f->offset[i + 1] - f->offset[i]);
  return bw;
}

Index LinOp::lowrank_rank() const noexcept {
  Index r = 0;
  for (const auto& t : terms_)
    for (const auto& f : t.factors) r += f->lowrank_v.cols();
  return r;
}

LinOp build_operator(const OperatorSpec& op_spec, Index p) {
  validate(op_spec, p);
  auto single = [&](FactorPtr f) {
    LinOp::Term t;
    t.factors.push_back(std::move(f));
    return LinOp(p, {std::move(t)}, to_string(op_spec), op_spec);
  };
  if (std::holds_alternative<spec::Identity>(op_spec.kind)) return LinOp(p);
  if (const auto* s = std::get_if<spec::SavgolSmooth>(&op_spec.kind))
    return single(savgol_factor(p, s->window, s->order, 0));
  if (const auto* s = std::get_if<spec::SavgolDeriv>(&op_spec.kind))
    return single(savgol_factor(p, s->window, s->order, s->deriv));
  if (std::holds_alternative<spec::FiniteDiffFirst>(op_spec.kind))
    return single(finite_diff_factor(p));
  if (const auto* s = std::get_if<spec::Detrend>(&op_spec.kind))
    return single(detrend_factor(p, s->degree));
  if (const auto* s = std::get_if<spec::NwGapDeriv>(&op_spec.kind))
    return single(nw_gap_factor(p, s->gap, s->segment));
  const auto& members = std::get<spec::Compose>(op_spec.kind).ops;
  std::vector<LinOp> built;
  built.reserve(members.size());
  for (const auto& m : members) built.push_back(build_operator(m, p));
  return compose(built);
}

Matrix apply_rows(const LinOp& op, const Matrix& x) {
  if (x.cols() != op.size())
    throw DimensionError("apply_rows: expected " + std::to_string(op.size()) + " columns, got " +
                         std::to_string(x.cols()));
  // X A^T = X F_d^T ... F_0^T: the last factor acts first.
  return apply_terms(op, x, true, factor_rows);
}

Matrix apply_forward(const LinOp& op, const Matrix& m) {
  check_rows(op, m.rows(), "apply_forward");
  return apply_terms(op, m, true, factor_forward);
}

Matrix apply_adjoint(const LinOp& op, const Matrix& m) {
  check_rows(op, m.rows(), "apply_adjoint");
  return apply_terms(op, m, false, factor_adjoint);
}

LinOp compose(const std::vector<LinOp>& ops) {
  if (ops.empty()) throw ConfigError("compose: empty operator list");
  const Index p = ops.front().size();
  for (const auto& op : ops)
    if (op.size() != p)
      throw DimensionError("compose: mixed channel counts " + std::to_string(p) + " and " +
                           std::to_string(op.size()));

  std::vector<LinOp::Term> terms = ops.front().terms();
  for (std::size_t k = 1; k < ops.size(); ++k) {
    std::vector<LinOp::Term> next;
    next.reserve(terms.size() * ops[k].terms().size());
    for (const auto& left : terms) {
      for (const auto& right : ops[k].terms()) {
        LinOp::Term t;
        t.weight = left.weight * right.weight;
        t.factors = left.factors;
        t.factors.insert(t.factors.end(), right.factors.begin(), right.factors.end());
        next.push_back(std::move(t));
      }
    }
    terms = std::move(next);
  }

  std::string name = "compose(";
  std::vector<OperatorSpec> specs;
  bool all_specs = true;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (k) name += ',';
    name += ops[k].name();
    if (ops[k].spec())
      specs.push_back(*ops[k].spec());
    else
      all_specs = false;
  }
  name += ')';
  std::optional<OperatorSpec> spec;
  if (all_specs) spec = OperatorSpec::compose(std::move(specs));
  return LinOp(p, std::move(terms), std::move(name), std::move(spec));
}

LinOp linear_combination(const std::vector<LinOp>& ops, const std::vector<double>& weights) {
  if (ops.empty() || ops.size() != weights.size())
    throw ConfigError("linear_combination: need one weight per operator");
  const Index p = ops.front().size();
  std::vector<LinOp::Term> terms;
  std::string name = "mix(";
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (ops[k].size() != p) throw DimensionError("linear_combination: mixed channel counts");
    if (k) name += ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g*", weights[k]);
    name += buf;
    name += ops[k].name();
    for (auto t : ops[k].terms()) {
      t.weight *= weights[k];
      terms.push_back(std::move(t));
    }
  }
  name += ')';
  return LinOp(p, std::move(terms), std::move(name), std::nullopt);
}

Matrix materialise(const LinOp& op) {
  const Index p = op.size();
  if (p > kMaterialiseLimit)
    throw ConfigError("materialise: p = " + std::to_string(p) + " exceeds guard " +
                      std::to_string(kMaterialiseLimit));
  Matrix total = Matrix::Zero(p, p);
  for (const auto& term : op.terms()) {
    Matrix prod = Matrix::Identity(p, p);
    for (const auto& f : term.factors) prod = prod * dense_factor(*f, p);
    total += term.weight * prod;
  }
  return total;
}

OperatorBank make_bank(const std::vector<OperatorSpec>& specs, Index p) {
  if (specs.empty() || !(specs.front() == OperatorSpec::identity()))
    throw ConfigError("operator bank: index 0 must be the identity");
  OperatorBank bank;
  for (const auto& s : specs) {
    bank.ops.push_back(build_operator(s, p));
    bank.names.push_back(to_string(s));
  }
  return bank;
}

OperatorBank compact_bank(Index p) {
  if (p < 1) throw ConfigError("compact_bank: p must be >= 1");
  std::vector<OperatorSpec> specs{OperatorSpec::identity()};
  std::vector<std::string> notes;

  auto sg_window = [&](int wanted, const std::string& label) -> int {
    if (wanted <= p) return wanted;
    if (p < 11) {
      notes.push_back(label + " dropped: p=" + std::to_string(p) + " < 11");
      return 0;
    }
    const int shrunk = static_cast<int>(p % 2 == 1 ? p : p - 1);
    notes.push_back(label + " window " + std::to_string(wanted) + " -> " + std::to_string(shrunk));
    return shrunk;
  };

  if (int w = sg_window(11, "savgol_smooth w11")) specs.push_back(OperatorSpec::savgol_smooth(w, 2));
  if (int w = sg_window(21, "savgol_smooth w21")) specs.push_back(OperatorSpec::savgol_smooth(w, 2));
  if (int w = sg_window(11, "savgol_deriv1 w11")) specs.push_back(OperatorSpec::savgol_deriv(w, 2, 1));
  if (int w = sg_window(21, "savgol_deriv1 w21")) specs.push_back(OperatorSpec::savgol_deriv(w, 2, 1));
  if (int w = sg_window(11, "savgol_deriv2 w11")) specs.push_back(OperatorSpec::savgol_deriv(w, 2, 2));
  for (int degree : {1, 2}) {
    if (p >= degree + 1)
      specs.push_back(OperatorSpec::detrend(degree));
    else
      notes.push_back("detrend degree " + std::to_string(degree) + " dropped: p too small");
  }
  if (p >= 2)
    specs.push_back(OperatorSpec::finite_diff_first());
  else
    notes.push_back("finite_diff_first dropped: p < 2");

  OperatorBank bank = make_bank(specs, p);
  bank.notes = std::move(notes);
  return bank;
}

OperatorBank identity_bank(Index p) { return make_bank({OperatorSpec::identity()}, p); }

}  // namespace aomcal
