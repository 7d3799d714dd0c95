#include <Eigen/Dense>
#include <cmath>

#include "aomcal/aom_ridge.hpp"
#include "aomcal/error.hpp"
#include "aomcal/oracle.hpp"
#include "aomcal/rng.hpp"
#include "aomcal/synthetic.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace aomcal;
using aomcal::testing::max_abs;
using aomcal::testing::max_abs_diff;
using aomcal::testing::random_matrix;
using aomcal::testing::rel_diff;

namespace {

SyntheticData small_data(std::uint64_t seed, Index n = 60, Index p = 48) {
  return planted_derivative(seed, {.n = n, .p = p});
}

}  // namespace

TEST_CASE("two-sample hand case") {
  Matrix x(2, 2), y(2, 1);
  x << 1, 0, 0, 1;
  y << 0, 1;
  const CenteredData d = center(x, y);
  const Matrix k = operator_kernel(d, LinOp(2));
  Matrix k_ref(2, 2);
  k_ref << 0.5, -0.5, -0.5, 0.5;
  CHECK(max_abs_diff(k, k_ref) <= 1e-15);
  const Matrix c = dual_solve(k, 1.0, d.yc);
  CHECK(c(0, 0) == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(c(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  const Matrix beta = ridge_coefficients(LinOp(2), d, c);
  CHECK(beta(0, 0) == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(beta(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("dual solve residual and large-alpha limit") {
  const SyntheticData d0 = small_data(1);
  const CenteredData d = center(d0.x, d0.y);
  const OperatorBank bank = compact_bank(48);
  for (const LinOp& op : bank.ops) {
    const Matrix k = operator_kernel(d, op);
    CHECK(max_abs_diff(k, k.transpose()) <= 1e-12 * std::max(1.0, max_abs(k)));
    const Matrix c = dual_solve(k, 0.3, d.yc);
    const Matrix resid = k * c + 0.3 * c - d.yc;
    CHECK(max_abs(resid) <= 1e-10 * std::max(1.0, max_abs(d.yc)));
    const double big = 1e12;
    const Matrix c_big = dual_solve(k, big, d.yc);
    CHECK(max_abs_diff(c_big * big, d.yc) <= 1e-6 * max_abs(d.yc));
  }
  CHECK_THROWS_AS(dual_solve(-Matrix::Identity(4, 4), 0.5, Matrix::Ones(4, 1)), NumericError);
}

TEST_CASE("dual coefficients equal primal ridge on the transformed spectra") {
  for (std::uint64_t seed : {2u, 3u}) {
    const SyntheticData d0 = small_data(seed, 40, seed == 2 ? 60 : 35);
    const Index p = d0.x.cols();
    const CenteredData d = center(d0.x, d0.y);
    const OperatorBank bank = compact_bank(p);
    for (const LinOp& op : bank.ops)
      for (double alpha : {1e-4, 1e-1, 10.0}) {
        const Matrix beta = ridge_coefficients(op, d, dual_solve(operator_kernel(d, op), alpha, d.yc));
        const ReferenceFit ref = reference_ridge(apply_rows(op, d0.x), d0.y, alpha);
        const Matrix mapped = materialise(op).transpose() * ref.coefficients;
        CHECK(rel_diff(beta, mapped) <= 1e-8);
      }
  }
}

TEST_CASE("detrend annihilates a linear baseline in the kernel") {
  const Index n = 10, p = 40;
  Rng rng(4);
  Matrix x = random_matrix(n, p, rng);
  const Matrix y = random_matrix(n, 1, rng);
  const OperatorBank bank = compact_bank(p);
  const LinOp& detrend = bank.ops[6];
  // Offsets and slopes differ per row.
  Matrix line_only(n, p);
  for (Index i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    for (Index j = 0; j < p; ++j) line_only(i, j) = a + b * static_cast<double>(j);
  }
  const CenteredData d = center(x + line_only, y);
  const CenteredData d_ref = center(x, y);
  CHECK(rel_diff(operator_kernel(d, detrend), operator_kernel(d_ref, detrend)) <= 1e-10);
}

TEST_CASE("alpha sweep from one eigendecomposition matches fresh factorisations") {
  // Well-conditioned kernel, so the fresh Cholesky solves are accurate down to alpha = 1e-6.
  const CenteredData d = center(random_matrix(50, 120, 5), random_matrix(50, 2, 6));
  const OperatorBank bank = compact_bank(120);
  const std::vector<double> alphas = default_alpha_grid();
  REQUIRE(alphas.size() == 50);
  CHECK(alphas.front() == doctest::Approx(1e-6));
  CHECK(alphas.back() == doctest::Approx(1e3));
  for (std::size_t b : {0u, 3u, 8u}) {
    const Matrix k = operator_kernel(d, bank.ops[b]);
    const KernelEigen eig(k, d.yc);
    CHECK(eig.values.minCoeff() >= 0.0);
    double worst = 0;
    for (double alpha : alphas) {
      const Matrix a = ridge_coefficients(bank.ops[b], d, eig.dual(alpha));
      const Matrix c = ridge_coefficients(bank.ops[b], d, dual_solve(k, alpha, d.yc));
      worst = std::max(worst, rel_diff(a, c));
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("training residual grows with alpha") {
  const SyntheticData d0 = small_data(6);
  const CenteredData d = center(d0.x, d0.y);
  const OperatorBank bank = compact_bank(48);
  for (const LinOp& op : bank.ops) {
    const Matrix k = operator_kernel(d, op);
    const KernelEigen eig(k, d.yc);
    double prev = -1;
    for (double alpha : default_alpha_grid()) {
      const Matrix c = eig.dual(alpha);
      // Training fit is K C = Yc - alpha C.
      const double r = (alpha * c).norm();
      CHECK(r >= prev - 1e-12 * std::max(1.0, d.yc.norm()));
      prev = r;
    }
  }
}

TEST_CASE("mixture kernel equals ridge on the wide block matrix") {
  const SyntheticData d0 = small_data(7, 30, 32);
  const CenteredData d = center(d0.x, d0.y);
  const OperatorBank bank = compact_bank(32);
  const std::vector<LinOp> ops{bank.ops[0], bank.ops[3], bank.ops[6]};
  const MixtureKernel mk = mixture_kernel(d, ops);
  REQUIRE(mk.scales.size() == 3);
  Matrix wide(30, 96);
  for (std::size_t b = 0; b < 3; ++b) {
    const Matrix w = apply_rows(ops[b], d.xc);
    const double rms = std::sqrt(w.squaredNorm() / static_cast<double>(w.size()));
    CHECK(mk.scales[b] == doctest::Approx(1.0 / rms).epsilon(1e-12));
    wide.middleCols(static_cast<Index>(32 * b), 32) = mk.scales[b] * w;
  }
  CHECK(rel_diff(mk.kernel, wide * wide.transpose()) <= 1e-10);

  const double alpha = 0.5;
  const Matrix beta = mk.recover(dual_solve(mk.kernel, alpha, d.yc));
  // Primal ridge on the wide design, mapped back through each scaled block.
  const Matrix gamma =
      (wide.transpose() * wide + alpha * Matrix::Identity(96, 96)).ldlt().solve(wide.transpose() * d.yc);
  Matrix mapped = Matrix::Zero(32, 1);
  for (std::size_t b = 0; b < 3; ++b)
    mapped += mk.scales[b] * materialise(ops[b]).transpose() * gamma.middleRows(static_cast<Index>(32 * b), 32);
  CHECK(rel_diff(beta, mapped) <= 1e-8);

  CHECK_THROWS_AS(mixture_kernel(d, ops, {1.0, -1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(mixture_kernel(d, ops, {0.0, 0.0, 0.0}), ConfigError);
}

TEST_CASE("two identity blocks at half weight equal a single identity") {
  const SyntheticData d0 = small_data(8, 25, 30);
  const CenteredData d = center(d0.x, d0.y);
  const std::vector<LinOp> ops{LinOp(30), LinOp(30)};
  const double s = std::sqrt(0.5);
  const MixtureKernel mk = mixture_kernel(d, ops, {s, s});
  CHECK(rel_diff(mk.kernel, operator_kernel(d, LinOp(30))) <= 1e-12);
}

TEST_CASE("grid size, determinism and dual recovery") {
  const SyntheticData d0 = small_data(9, 70, 40);
  RidgeConfig cfg;
  cfg.bank = compact_bank(40);
  const RidgeFit a = fit_aom_ridge(d0.x, d0.y, cfg);
  CHECK(a.table.cells() == 450);
  CHECK(a.alpha == a.table.chosen_alpha());
  CHECK(static_cast<std::size_t>(a.operator_id) == a.table.chosen_candidate());
  cfg.threads = 3;
  const RidgeFit b = fit_aom_ridge(d0.x, d0.y, cfg);
  CHECK(a.table == b.table);
  CHECK(max_abs_diff(a.beta, b.beta) == 0.0);
  CHECK(rel_diff(beta_from_dual(a, cfg.bank, d0.x), a.beta) <= 1e-10);

  const RidgeFit m = fit_mixture_ridge(d0.x, d0.y, cfg);
  CHECK(m.operator_id == -1);
  CHECK(m.scales.size() == 9);
  CHECK(rel_diff(beta_from_dual(m, cfg.bank, d0.x), m.beta) <= 1e-10);
  const Matrix xn = random_matrix(5, 40, 3);
  CHECK(predict(m, xn).rows() == 5);
}

TEST_CASE("identity-only bank reproduces plain CV ridge") {
  for (std::uint64_t seed : {10u, 11u}) {
    const SyntheticData d0 = small_data(seed, 50, 45);
    RidgeConfig cfg;
    cfg.bank = identity_bank(45);
    const FoldPlan plan = kfold_plan(50, 5, seed);
    const RidgeFit fit = fit_aom_ridge(d0.x, d0.y, cfg, plan);
    const PlainCvResult plain = plain_cv_ridge(d0.x, d0.y, cfg.alphas, plan);
    CHECK(fit.alpha == plain.alpha);
    CHECK(max_abs_diff(fit.beta, plain.coefficients) <= 1e-12);
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a)
      CHECK(std::abs(fit.table.value(0, a) - plain.cv[a]) <= 1e-12);
  }
}

TEST_CASE("ridge table ties and CSV header") {
  RidgeTable t({"identity", "detrend(degree=1)"}, {0.1, 1.0}, 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t a = 0; a < 2; ++a) t.set_fold_value(0, c, a, 1.0);
  t.choose();
  CHECK(t.chosen_candidate() == 0);
  CHECK(t.chosen_alpha_index() == 0);
  CHECK(t.to_csv().rfind("candidate,alpha,fold,rmse\n", 0) == 0);
}
