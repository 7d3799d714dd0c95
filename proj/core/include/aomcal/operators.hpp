#pragma once

// Strict-linear wavelength operators.
//
// An operator is a fixed p x p matrix A acting on row spectra as X * A^T. It
// is stored as a weighted sum of products of structured factors, each factor
// being a row-banded core plus an optional low-rank correction -V * M. Dense
// materialisation is only used by tests and the reference (oracle) paths.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aomcal/types.hpp"

namespace aomcal {

struct OperatorSpec;

namespace spec {

struct Identity {
  bool operator==(const Identity&) const = default;
};
struct SavgolSmooth {
  int window = 11;
  int order = 2;
  bool operator==(const SavgolSmooth&) const = default;
};
struct SavgolDeriv {
  int window = 11;
  int order = 2;
  int deriv = 1;
  bool operator==(const SavgolDeriv&) const = default;
};
struct FiniteDiffFirst {
  bool operator==(const FiniteDiffFirst&) const = default;
};
struct Detrend {
  int degree = 1;
  bool operator==(const Detrend&) const = default;
};
/// Norris-Williams gap derivative: segment means `gap` channels either side.
struct NwGapDeriv {
  int gap = 1;
  int segment = 1;
  bool operator==(const NwGapDeriv&) const = default;
};
/// Matrix product of the members, applied right-to-left.
struct Compose {
  std::vector<OperatorSpec> ops;
  bool operator==(const Compose& other) const;
};

}  // namespace spec

struct OperatorSpec {
  using Kind = std::variant<spec::Identity, spec::SavgolSmooth, spec::SavgolDeriv,
                            spec::FiniteDiffFirst, spec::Detrend, spec::NwGapDeriv,
                            spec::Compose>;
  Kind kind;

  static OperatorSpec identity() { return {spec::Identity{}}; }
  static OperatorSpec savgol_smooth(int window, int order) {
    return {spec::SavgolSmooth{window, order}};
  }
  static OperatorSpec savgol_deriv(int window, int order, int deriv) {
    return {spec::SavgolDeriv{window, order, deriv}};
  }
  static OperatorSpec finite_diff_first() { return {spec::FiniteDiffFirst{}}; }
  static OperatorSpec detrend(int degree) { return {spec::Detrend{degree}}; }
  static OperatorSpec nw_gap_deriv(int gap, int segment) {
    return {spec::NwGapDeriv{gap, segment}};
  }
  static OperatorSpec compose(std::vector<OperatorSpec> ops) {
    return {spec::Compose{std::move(ops)}};
  }

  bool operator==(const OperatorSpec& other) const { return kind == other.kind; }
};

inline bool spec::Compose::operator==(const Compose& other) const { return ops == other.ops; }

/// Canonical text form, e.g. `savgol_deriv(window=11,order=2,deriv=1)`.
std::string to_string(const OperatorSpec& spec);

/// Parses the canonical text form. Throws ConfigError on malformed input.
OperatorSpec parse_operator_spec(std::string_view text);

/// Throws ConfigError naming the offending field if `spec` cannot be bound to p channels.
void validate(const OperatorSpec& spec, Index p);

class LinOp {
public:
  /// Identity on p channels.
  explicit LinOp(Index p = 0);

  Index size() const noexcept { return p_; }
  const std::string& name() const noexcept { return name_; }
  const std::optional<OperatorSpec>& spec() const noexcept { return spec_; }
  bool is_identity() const noexcept;
  /// Largest band run over all factors; the per-row cost of a banded application.
  Index bandwidth() const noexcept;
  /// Total low-rank correction rank over all factors.
  Index lowrank_rank() const noexcept;

  struct Factor {
    std::vector<Index> start;   // first column of each row's coefficient run
    std::vector<Index> offset;  // p+1 offsets into coeffs
    std::vector<double> coeffs;
    Matrix lowrank_v;  // p x r, correction is -V * M
    Matrix lowrank_m;  // r x p
  };
  /// weight * factors[0] * factors[1] * ... ; an empty product is the identity.
  struct Term {
    double weight = 1.0;
    std::vector<std::shared_ptr<const Factor>> factors;
  };

  const std::vector<Term>& terms() const noexcept { return terms_; }

private:
  friend LinOp build_operator(const OperatorSpec& spec, Index p);
  friend LinOp compose(const std::vector<LinOp>& ops);
  friend LinOp linear_combination(const std::vector<LinOp>& ops,
                                  const std::vector<double>& weights);

  LinOp(Index p, std::vector<Term> terms, std::string name, std::optional<OperatorSpec> spec);

  Index p_ = 0;
  std::vector<Term> terms_;
  std::string name_;
  std::optional<OperatorSpec> spec_;
};

LinOp build_operator(const OperatorSpec& spec, Index p);

/// X * A^T for sample-major X (n x p), without forming A.
Matrix apply_rows(const LinOp& op, const Matrix& x);
/// A * M for M (p x q).
Matrix apply_forward(const LinOp& op, const Matrix& m);
/// A^T * M for M (p x q).
Matrix apply_adjoint(const LinOp& op, const Matrix& m);

/// ops[0] * ops[1] * ... * ops[d-1]; the last member is applied first.
LinOp compose(const std::vector<LinOp>& ops);

/// sum_i weights[i] * ops[i]. Used for weighted chain mixtures.
LinOp linear_combination(const std::vector<LinOp>& ops, const std::vector<double>& weights);

inline constexpr Index kMaterialiseLimit = 8192;

/// Dense p x p form. Throws ConfigError when p exceeds kMaterialiseLimit.
Matrix materialise(const LinOp& op);

struct OperatorBank {
  std::vector<LinOp> ops;
  std::vector<std::string> names;
  /// Window substitutions or drops applied for small channel counts.
  std::vector<std::string> notes;

  std::size_t size() const noexcept { return ops.size(); }
};

/// The nine-operator compact bank: identity; SG smooth w11, w21; SG 1st
/// derivative w11, w21; SG 2nd derivative w11; detrend degree 1, 2; first
/// finite difference. SG polynomial order is 2 throughout.
OperatorBank compact_bank(Index p);

/// A bank holding only the identity.
OperatorBank identity_bank(Index p);

/// Bank built from explicit specs; index 0 must be the identity.
OperatorBank make_bank(const std::vector<OperatorSpec>& specs, Index p);

}  // namespace aomcal
