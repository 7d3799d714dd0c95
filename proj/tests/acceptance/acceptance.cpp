// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.
//
// Usage: aomcal_acceptance [path/to/aomcal] [scratch-dir]
// Criterion 9 needs the CLI binary; without it that line fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aomcal/aom_pls.hpp"
#include "aomcal/aom_ridge.hpp"
#include "aomcal/fastaom.hpp"
#include "aomcal/io.hpp"
#include "aomcal/oracle.hpp"
#include "aomcal/rng.hpp"
#include "aomcal/stats.hpp"
#include "aomcal/synthetic.hpp"

using namespace aomcal;

namespace {

// Criterion 1
constexpr int kEquivalenceConfigs = 20;
constexpr double kEquivalenceSeconds = 60.0;
// Criterion 2
constexpr double kIdentityReductionTol = 1e-12;
// Criteria 3 and 7
constexpr int kSeeds = 50;
constexpr int kRequiredHits = 40;  // 80% of 50
constexpr double kPlantedSeconds = 300.0;
// Criterion 4
constexpr int kVertexSamples = 2000;
// Criterion 5
constexpr double kWinnerRatio = 1.22;
constexpr double kWinnerTol = 0.005;
// Criterion 6
constexpr double kScalingRatio = 1.2;
constexpr std::uint64_t kMaxInnerExtractions = 45;
constexpr std::uint64_t kMinGridExtractions = 600;
// Criterion 7
constexpr double kKktTol = 1e-8;
// Criterion 8
constexpr double kWilcoxonP = 1e-4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome equivalence() {
  const EquivalenceReport r = equivalence_suite(2024, kEquivalenceConfigs);
  const bool ok = r.passed() && r.rows.size() == 4u * kEquivalenceConfigs &&
                  r.seconds <= kEquivalenceSeconds;
  return {ok, std::to_string(r.rows.size() / 4) + " configs; identity " +
                  num(r.max_discrepancy(kCheckIdentity)) + ", nipals " +
                  num(r.max_discrepancy(kCheckNipals)) + ", folded " +
                  num(r.max_discrepancy(kCheckFolded)) + ", ridge " +
                  num(r.max_discrepancy(kCheckRidge)) + "; " + num(r.seconds, "%.1f") + " s"};
}

Outcome identity_reduction() {
  double worst_pls = 0, worst_ridge = 0;
  bool same_choice = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticData d = planted_derivative(300 + seed, {.n = 80, .p = 120});
    const FoldPlan plan = kfold_plan(80, 5, seed);
    AomPlsConfig pc;
    pc.bank = identity_bank(120);
    const AomPlsFit pf = fit_aom_pls(d.x, d.y, pc, plan);
    const PlainCvResult pp = plain_cv_pls(d.x, d.y, pc.k_max, plan);
    worst_pls = std::max(worst_pls, (pf.pls.coefficients - pp.coefficients).cwiseAbs().maxCoeff());
    same_choice = same_choice && pf.pls.n_components == pp.components;

    RidgeConfig rc;
    rc.bank = identity_bank(120);
    const RidgeFit rf = fit_aom_ridge(d.x, d.y, rc, plan);
    const PlainCvResult pr = plain_cv_ridge(d.x, d.y, rc.alphas, plan);
    worst_ridge = std::max(worst_ridge, (rf.beta - pr.coefficients).cwiseAbs().maxCoeff());
    same_choice = same_choice && rf.alpha == pr.alpha;
  }
  return {same_choice && worst_pls <= kIdentityReductionTol && worst_ridge <= kIdentityReductionTol,
          "max |dB| pls " + num(worst_pls) + ", ridge " + num(worst_ridge) +
              (same_choice ? "; same K and alpha" : "; selection differs")};
}

Outcome planted_operator() {
  const auto t0 = Clock::now();
  int derivative = 0, wins = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const SyntheticData d = planted_derivative(1000 + static_cast<std::uint64_t>(s));
    const Split sp = spxy_split(d.x, d.y, 0.3);
    const Matrix xtr = take_rows(d.x, sp.train), ytr = take_rows(d.y, sp.train);
    const Matrix xte = take_rows(d.x, sp.test), yte = take_rows(d.y, sp.test);
    AomPlsConfig cfg;
    cfg.bank = compact_bank(d.x.cols());
    cfg.seed = static_cast<std::uint64_t>(s);
    const AomPlsFit aom = fit_aom_pls(xtr, ytr, cfg);
    cfg.bank = identity_bank(d.x.cols());
    const AomPlsFit plain = fit_aom_pls(xtr, ytr, cfg);
    // Derivative family: SG first derivative w11, w21 and the first difference.
    const std::size_t b = aom.selection.chosen_operator();
    derivative += b == 3 || b == 4 || b == 8;
    wins += rmsep(predict(aom.pls, xte), yte) <= rmsep(predict(plain.pls, xte), yte);
  }
  const double secs = seconds_since(t0);
  return {derivative >= kRequiredHits && wins >= kRequiredHits && secs <= kPlantedSeconds,
          "derivative chosen " + std::to_string(derivative) + "/50, beats identity " +
              std::to_string(wins) + "/50; " + num(secs, "%.1f") + " s"};
}

Outcome vertex_optimum() {
  int held = 0;
  double worst = -1e300;
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const Index b = 2 + static_cast<Index>(rng.below(11));
    const Index r = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(b) + 2));
    Matrix m(b, r);
    for (Index i = 0; i < b; ++i)
      for (Index j = 0; j < r; ++j) m(i, j) = rng.normal();
    const VertexReport v = vertex_check(m * m.transpose(), kVertexSamples, 100 + t);
    held += v.holds;
    worst = std::max(worst, v.best_interior - v.vertex_max);
  }
  for (int t = 0; t < 100; ++t) {
    const SyntheticData d = planted_derivative(2000 + static_cast<std::uint64_t>(t), {.n = 60, .p = 96});
    const CenteredData c = center(d.x, d.y);
    const VertexReport v = vertex_check(compact_bank(96), cross_covariance(c), kVertexSamples, 300 + t);
    held += v.holds;
    worst = std::max(worst, v.best_interior - v.vertex_max);
  }
  return {held == 200, std::to_string(held) + "/200 hold; max(interior - vertex) " + num(worst)};
}

Outcome winner_ratio() {
  const double ratio = winner_bias(1500, 1.0, 30) / winner_bias(135, 1.0, 30);
  return {std::abs(ratio - kWinnerRatio) <= kWinnerTol, "ratio " + num(ratio, "%.5f")};
}

// Per-call time of two stages, measured in interleaved batches so both see
// the same machine state. Returns the ratio of the batch medians (b over a).
double interleaved_ratio(const std::function<void()>& a, const std::function<void()>& b, int reps) {
  std::vector<double> ta, tb;
  for (int batch = 0; batch < 21; ++batch)
    for (int which = 0; which < 2; ++which) {
      const auto& fn = which == 0 ? a : b;
      const auto t0 = Clock::now();
      for (int r = 0; r < reps; ++r) fn();
      (which == 0 ? ta : tb).push_back(seconds_since(t0) / reps);
    }
  std::nth_element(ta.begin(), ta.begin() + 10, ta.end());
  std::nth_element(tb.begin(), tb.begin() + 10, tb.end());
  return tb[10] / ta[10];
}

struct ScreeningInputs {
  Matrix s;
  TruncatedSvd svd;
  double y_norm = 0;
};

ScreeningInputs screening_inputs(Index n, Index p) {
  const SyntheticData d = planted_derivative(7, {.n = n, .p = p});
  const CenteredData c = center(d.x, d.y);
  return {cross_covariance(c), truncated_svd(c.xc, 100, 0, 1e-6), c.yc.norm()};
}

Outcome budget_scaling() {
  const Index p = 500;
  const OperatorBank bank = compact_bank(p);
  const std::vector<Chain> chains = enumerate_chains(bank, 2);
  // S and the truncated SVD are formed once per n; only the scoring stage is timed.
  const ScreeningInputs small = screening_inputs(500, p), large = screening_inputs(5000, p);
  volatile double sink = 0;
  const auto screen = [&](const ScreeningInputs& in) {
    return [&, in = &in] { sink = sink + screen_bank(in->s, bank)[1](0, 0); };
  };
  const auto score = [&](const ScreeningInputs& in) {
    return [&, in = &in] {
      sink = sink + score_chains(bank, chains, in->svd, in->s.col(0), in->y_norm)[1].score;
    };
  };
  const double r_screen = interleaved_ratio(screen(small), screen(large), 2000);
  const double r_chain = interleaved_ratio(score(small), score(large), 3);

  const SyntheticData d = planted_derivative(8);
  AomPlsConfig cfg;
  cfg.bank = compact_bank(d.x.cols());
  reset_pls_extraction_count();
  const SelectionTable table = select_global(d.x, d.y, cfg);
  const std::uint64_t inner = pls_extraction_count();
  const ExplicitGridResult grid =
      explicit_grid_select(d.x, d.y, cfg.bank, cfg.k_max, kfold_plan(d.x.rows(), cfg.folds, cfg.seed));
  const bool ok = r_screen <= kScalingRatio && r_chain <= kScalingRatio &&
                  inner <= kMaxInnerExtractions && table.extractions == inner &&
                  grid.extractions >= kMinGridExtractions;
  return {ok, "n=5000/n=500 time ratio: bank screen " + num(r_screen, "%.3f") + ", chain scoring " +
                  num(r_chain, "%.3f") + "; extractions " + std::to_string(inner) + " vs grid " +
                  std::to_string(grid.extractions)};
}

Outcome fastaom() {
  std::size_t scored = 0, out_of_range = 0, recovered = 0;
  const Chain planted{8, 1};  // finite difference after the w11 smoother
  for (int s = 0; s < kSeeds; ++s) {
    const SyntheticData d = planted_chain(4000 + static_cast<std::uint64_t>(s));
    FastAomConfig cfg;
    cfg.bank = compact_bank(d.x.cols());
    cfg.seed = static_cast<std::uint64_t>(s);
    const FastAomFit fit = fit_fastaom(d.x, d.y, cfg);
    const CenteredData c = center(d.x, d.y);
    const TruncatedSvd svd = truncated_svd(c.xc, std::min<Index>({c.samples(), c.channels(), 100}),
                                           cfg.seed, 1e-6);
    for (const auto& cand : score_chains(cfg.bank, enumerate_chains(cfg.bank, 2), svd,
                                         cross_covariance(c).col(0), c.yc.norm())) {
      ++scored;
      out_of_range += !(cand.score >= 0.0 && cand.score <= 1.0 && cand.raw_score <= 1.0 + 1e-9);
    }
    recovered += std::any_of(fit.survivors.begin(), fit.survivors.end(),
                             [&](const ChainCandidate& c) { return c.chain == planted; });
  }

  Rng rng(99);
  double worst_kkt = 0;
  for (int t = 0; t < 500; ++t) {
    const Index rows = 3 + static_cast<Index>(rng.below(60));
    const Index cols = 1 + static_cast<Index>(rng.below(20));
    Matrix m(rows, cols);
    Vector b(rows);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
      b(i) = rng.normal();
    }
    worst_kkt = std::max(worst_kkt, nnls_kkt_residual(m, b, nnls(m, b).w));
  }
  const bool ok = out_of_range == 0 && recovered >= static_cast<std::size_t>(kRequiredHits) &&
                  worst_kkt <= kKktTol;
  return {ok, std::to_string(scored - out_of_range) + "/" + std::to_string(scored) +
                  " scores in [0,1]; planted chain in top 8 for " + std::to_string(recovered) +
                  "/50; max NNLS KKT " + num(worst_kkt)};
}

Outcome statistics() {
  std::vector<double> a, b;
  for (int i = 0; i < 20; ++i) {
    b.push_back(1.0 + 0.1 * i);
    a.push_back(0.9 * b.back());
  }
  const PairedSummary s = paired_summary(a, b);
  const auto holm = holm_adjust({0.01, 0.04});
  const bool ok = std::abs(s.median_ratio - 0.9) <= 1e-12 && s.wins == 20 &&
                  s.p_one_sided < kWilcoxonP && std::abs(holm[0] - 0.02) <= 1e-15 &&
                  std::abs(holm[1] - 0.04) <= 1e-15;
  return {ok, "median " + num(s.median_ratio, "%.6g") + ", wins " + std::to_string(s.wins) +
                  ", p " + num(s.p_one_sided) + "; Holm {" + num(holm[0]) + ", " + num(holm[1]) + "}"};
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_round_trip(const std::string& binary, const std::filesystem::path& dir) {
  if (binary.empty() || !std::filesystem::exists(binary)) return {false, "aomcal binary not given"};
  std::filesystem::create_directories(dir);
  const auto path = [&](const char* name) { return (dir / name).string(); };
  const SyntheticData d = planted_derivative(5, {.n = 100, .p = 128});
  std::vector<std::string> header;
  for (Index j = 0; j < d.x.cols(); ++j) header.push_back(std::to_string(1100 + 2 * j));
  write_file_atomic(path("x.csv"), to_csv(header, d.x));
  write_file_atomic(path("y.csv"), to_csv({"y"}, d.y));
  const std::string q = "'" + binary + "'";
  const int fit = shell(q + " fit --method aom-pls --x '" + path("x.csv") + "' --y '" + path("y.csv") +
                        "' --out '" + path("model.json") + "'");
  const int pred = shell(q + " predict --model '" + path("model.json") + "' --x '" + path("x.csv") +
                         "' --out '" + path("pred.csv") + "'");
  const int validate = shell(q + " validate");
  if (fit != 0 || pred != 0) return {false, "fit exit " + std::to_string(fit) + ", predict exit " +
                                                std::to_string(pred)};
  // In-process fit on the same parsed inputs, then a reload of the saved model.
  const CsvTable x = load_csv(path("x.csv"));
  AomPlsConfig cfg;
  cfg.bank = compact_bank(x.values.cols());
  const AomPlsFit ref = fit_aom_pls(x.values, load_csv(path("y.csv")).values, cfg);
  const ModelFile model = load_model(path("model.json"));
  const Matrix from_cli = load_csv(path("pred.csv")).values;
  const double d_cli = (from_cli - predict(ref.pls, x.values)).cwiseAbs().maxCoeff();
  const double d_model = (model.predict(x.values) - from_cli).cwiseAbs().maxCoeff();
  const double d_coef = (model.coefficients - ref.pls.coefficients).cwiseAbs().maxCoeff();
  const bool ok = d_cli == 0.0 && d_model == 0.0 && d_coef == 0.0 && validate == 0;
  return {ok, "max |d| CLI vs in-process " + num(d_cli) + ", reload " + num(d_model) +
                  ", coefficients " + num(d_coef) + "; validate exit " + std::to_string(validate)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string binary = argc > 1 ? argv[1] : "";
  const std::filesystem::path scratch =
      argc > 2 ? std::filesystem::path(argv[2])
               : std::filesystem::temp_directory_path() / "aomcal_acceptance";

  struct Item {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Item> items{
      {1, "equivalence suite", equivalence},
      {2, "identity reduction", identity_reduction},
      {3, "planted-operator recovery", planted_operator},
      {4, "vertex optimum", vertex_optimum},
      {5, "winner-bias ratio", winner_ratio},
      {6, "budget scaling", budget_scaling},
      {7, "FastAOM", fastaom},
      {8, "paired statistics", statistics},
      {9, "CLI round trip", [&] { return cli_round_trip(binary, scratch); }},
  };
  int failed = 0;
  for (const auto& item : items) {
    Outcome o;
    try {
      o = item.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %-26s %s  %s\n", item.id, item.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass\n", static_cast<int>(items.size()) - failed, items.size());
  return failed == 0 ? 0 : 1;
}
