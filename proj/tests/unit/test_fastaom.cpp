#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "aomcal/error.hpp"
#include "aomcal/fastaom.hpp"
#include "aomcal/rng.hpp"
#include "aomcal/synthetic.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace aomcal;
using aomcal::testing::max_abs_diff;
using aomcal::testing::random_matrix;
using aomcal::testing::rel_diff;

namespace {

TruncatedSvd full_svd(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV(), 0, 0.0};
}

// Score computed on the explicit transformed matrix.
double dense_score(const Matrix& xc, const Vector& yc, const Matrix& a) {
  const Matrix xt = xc * a.transpose();
  const double num = (xt.transpose() * yc).squaredNorm();
  const double den = xt.squaredNorm() * yc.squaredNorm();
  return den > 0 ? num / den : 0.0;
}

}  // namespace

TEST_CASE("chain enumeration") {
  const OperatorBank bank = compact_bank(64);
  const auto d1 = enumerate_chains(bank, 1);
  const auto d2 = enumerate_chains(bank, 2);
  CHECK(d1.size() == 9);
  CHECK(d2.size() == 73);
  CHECK(d2.front() == Chain{0});
  std::set<Chain> unique(d2.begin(), d2.end());
  CHECK(unique.size() == 73);
  for (std::size_t i = 1; i < d2.size(); ++i)
    for (std::size_t b : d2[i]) CHECK(b != 0);
  CHECK(chain_name(bank, {8, 1}) == bank.names[8] + " * " + bank.names[1]);
  CHECK(rel_diff(materialise(chain_operator(bank, {8, 1})),
                 materialise(bank.ops[8]) * materialise(bank.ops[1])) <= 1e-12);
  CHECK_THROWS_AS(enumerate_chains(bank, 0), ConfigError);
  CHECK_THROWS_AS(chain_operator(bank, {9}), ConfigError);
}

TEST_CASE("folded numerator equals the materialised cross-covariance") {
  const SyntheticData d0 = planted_chain(1, {.n = 60, .p = 48});
  const CenteredData d = center(d0.x, d0.y);
  const Vector xty = cross_covariance(d).col(0);
  const OperatorBank bank = compact_bank(48);
  const TruncatedSvd base = full_svd(d.xc);
  for (const Chain& c : enumerate_chains(bank, 2)) {
    const Matrix a = materialise(chain_operator(bank, c));
    const double num = (apply_rows(chain_operator(bank, c), d.xc).transpose() * d.yc).squaredNorm();
    const ChainScore s = chain_score(chain_operator(bank, c), base, xty, d.yc.norm());
    const double ref_num = ((d.xc * a.transpose()).transpose() * d.yc).squaredNorm();
    CHECK(std::abs(num - ref_num) <= 1e-8 * std::max(1.0, ref_num));
    // A full SVD makes the denominator exact, so the score matches the dense ratio.
    CHECK(std::abs(s.raw - dense_score(d.xc, d.yc.col(0), a)) <= 1e-10);
  }
}

TEST_CASE("score hand cases") {
  const Index p = 20;
  const Matrix x = Matrix::Identity(p, p);
  Vector y = Vector::Zero(p);
  y(4) = 1.0;
  const TruncatedSvd base = full_svd(x);
  const ChainScore id = chain_score(LinOp(p), base, x.transpose() * y, y.norm());
  CHECK(id.raw == doctest::Approx(1.0 / static_cast<double>(p)).epsilon(1e-12));

  // A response orthogonal to every column of the transformed data.
  Matrix xo = Matrix::Zero(4, 3);
  xo(0, 0) = 1;
  xo(1, 1) = 1;
  xo(2, 2) = 1;
  Vector yo = Vector::Zero(4);
  yo(3) = 1.0;
  const ChainScore zero = chain_score(LinOp(3), full_svd(xo), xo.transpose() * yo, yo.norm());
  CHECK(zero.score == 0.0);

  const ChainScore none = chain_score(LinOp(3), full_svd(xo), Vector::Zero(3), 0.0);
  CHECK(none.zero_response);
  CHECK(none.score == 0.0);
}

TEST_CASE("all chain scores lie in the unit interval") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData d0 = planted_chain(seed, {.n = 80, .p = 96});
    const CenteredData d = center(d0.x, d0.y);
    const OperatorBank bank = compact_bank(96);
    const TruncatedSvd base = truncated_svd(d.xc, 40, seed, 1e-6);
    const auto chains = enumerate_chains(bank, 2);
    const auto scored = score_chains(bank, chains, base, cross_covariance(d).col(0), d.yc.norm());
    for (const auto& c : scored) {
      CHECK(c.score >= 0.0);
      CHECK(c.score <= 1.0);
      CHECK(c.raw_score <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("truncated SVD") {
  Matrix diag = Matrix::Zero(3, 3);
  diag.diagonal() << 3, 2, 1;
  const TruncatedSvd a = truncated_svd(diag, 2, 1);
  CHECK(a.sigma(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(a.sigma(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.residual <= 1e-10);

  Rng rng(2);
  const Vector u = random_matrix(30, 1, rng).col(0), v = random_matrix(50, 1, rng).col(0);
  const Matrix r1 = u * v.transpose();
  const TruncatedSvd b = truncated_svd(r1, 1, 3);
  CHECK(b.sigma(0) == doctest::Approx(u.norm() * v.norm()).epsilon(1e-12));
  CHECK(rel_diff(b.u * b.sigma.asDiagonal() * b.v.transpose(), r1) <= 1e-12);

  const Matrix m = random_matrix(40, 80, 4);
  const TruncatedSvd c = truncated_svd(m, 10, 5);
  const TruncatedSvd ref = full_svd(m);
  for (Index i = 0; i < 10; ++i) {
    CHECK(c.sigma(i) == doctest::Approx(ref.sigma(i)).epsilon(1e-9));
    CHECK(std::abs(std::abs(c.v.col(i).dot(ref.v.col(i))) - 1.0) <= 1e-8);
  }
  CHECK_THROWS_AS(truncated_svd(m, 0), ConfigError);
  CHECK_THROWS_AS(truncated_svd(m, 41), ConfigError);
}

TEST_CASE("NNLS hand cases") {
  const NnlsResult a = nnls(Matrix::Identity(2, 2), Vector::Map(std::vector<double>{1, -1}.data(), 2));
  CHECK(a.w(0) == doctest::Approx(1.0));
  CHECK(a.w(1) == 0.0);

  // b lies outside the cone of the columns; the optimum sits on one face.
  Matrix m(2, 2);
  m << 1, 1, 0, 1;
  Vector b(2);
  b << -1, 2;
  const NnlsResult c = nnls(m, b);
  CHECK(c.w(0) == 0.0);
  CHECK(c.w(1) == doctest::Approx(0.5));
  CHECK(nnls_kkt_residual(m, b, c.w) <= 1e-12);
  CHECK_THROWS_AS(nnls(m, Vector::Ones(3)), DimensionError);
}

TEST_CASE("NNLS beats a random search over the feasible set") {
  Rng rng(7);
  const Matrix m = random_matrix(12, 3, rng);
  const Vector b = random_matrix(12, 1, rng).col(0);
  const NnlsResult r = nnls(m, b);
  const double best = (m * r.w - b).norm();
  double search = 1e300;
  for (int i = 0; i < 100000; ++i) {
    Vector w(3);
    for (Index j = 0; j < 3; ++j) w(j) = 3.0 * rng.uniform();
    search = std::min(search, (m * w - b).norm());
  }
  CHECK(best <= search + 1e-12);
}

TEST_CASE("NNLS KKT residual on randomized instances") {
  Rng rng(8);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index rows = 5 + static_cast<Index>(rng.below(40));
    const Index cols = 1 + static_cast<Index>(rng.below(12));
    const Matrix m = random_matrix(rows, cols, rng);
    const Vector b = random_matrix(rows, 1, rng).col(0);
    const NnlsResult r = nnls(m, b);
    CHECK(r.w.minCoeff() >= 0.0);
    worst = std::max(worst, nnls_kkt_residual(m, b, r.w));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("single survivor reduces to AOM-PLS on that chain") {
  const SyntheticData d0 = planted_chain(3, {.n = 90, .p = 64});
  FastAomConfig cfg;
  cfg.bank = compact_bank(64);
  cfg.top_m = 1;
  cfg.k_max = 8;
  const FastAomFit fit = fit_fastaom(d0.x, d0.y, cfg);
  REQUIRE(fit.survivors.size() == 1);
  CHECK(fit.survivors[0].weight == 1.0);
  AomPlsConfig pc;
  pc.bank.ops = {chain_operator(cfg.bank, fit.survivors[0].chain)};
  pc.bank.names = {fit.survivors[0].name};
  pc.k_max = 8;
  const AomPlsFit ref = fit_aom_pls(d0.x, d0.y, pc, kfold_plan(90, 5, 0));
  CHECK(fit.pls_selection.chosen_components() == ref.selection.chosen_components());
  CHECK(rel_diff(fit.pls_stage.coefficients, ref.pls.coefficients) <= 1e-10);
  CHECK(rel_diff(fit.coefficients, ref.pls.coefficients) <= 1e-4);
}

TEST_CASE("stored coefficients reproduce the staged prediction") {
  const SyntheticData d0 = planted_chain(4, {.n = 100, .p = 80});
  FastAomConfig cfg;
  cfg.bank = compact_bank(80);
  const FastAomFit fit = fit_fastaom(d0.x, d0.y, cfg);
  CHECK(fit.chains_scored == 73);
  CHECK(fit.survivors.size() == 8);
  CHECK(fit.weights.minCoeff() >= 0.0);
  CHECK((fit.weights.array() > 0).count() <= 8);
  const Matrix xn = synthetic_spectra({.n = 12, .p = 80}, 77);
  CHECK(rel_diff(predict(fit, xn), predict_staged(fit, xn)) <= 1e-10);
  CHECK(fit.survivor_csv().rfind("chain,score,weight\n", 0) == 0);
  CHECK_THROWS_AS(fit_fastaom(d0.x, Matrix::Ones(100, 2), cfg), ConfigError);
}
