#include "aomcal/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "aomcal/error.hpp"
#include "aomcal/rng.hpp"

namespace aomcal {

namespace {

void check(const SyntheticConfig& cfg) {
  if (cfg.n < 2 || cfg.p < 12) throw ConfigError("synthetic: need n >= 2 and p >= 12");
  if (!(cfg.snr > 0)) throw ConfigError("synthetic: snr must be positive");
  if (cfg.bands < 1 || cfg.bands > 5) throw ConfigError("synthetic: bands must lie in [1, 5]");
}

Matrix spectra(const SyntheticConfig& cfg, Rng& rng) {
  const Index n = cfg.n, p = cfg.p;
  const auto pd = static_cast<double>(p);
  std::vector<double> centre(static_cast<std::size_t>(cfg.bands)), width(centre.size());
  for (std::size_t b = 0; b < centre.size(); ++b) {
    centre[b] = (0.1 + 0.8 * rng.uniform()) * pd;
    width[b] = cfg.width_min + (cfg.width_max - cfg.width_min) * rng.uniform();
  }
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i) {
    const double offset = cfg.offset_sd * rng.normal();
    const double slope = cfg.slope_sd * rng.normal() / pd;
    std::vector<double> conc(centre.size());
    for (auto& c : conc) c = rng.uniform() < 0.8 ? rng.uniform() : 0.0;
    double drift = 0.0;
    for (Index j = 0; j < p; ++j) {
      const auto jd = static_cast<double>(j);
      double v = offset + slope * jd;
      for (std::size_t b = 0; b < centre.size(); ++b) {
        const double u = (jd - centre[b]) / width[b];
        v += conc[b] * std::exp(-0.5 * u * u);
      }
      drift += cfg.drift_sd * rng.normal();
      x(i, j) = v + drift + cfg.white_sd * rng.normal();
    }
  }
  return x;
}

SyntheticData respond(Matrix x, const OperatorSpec& planted, double snr, Rng& rng) {
  const Index p = x.cols();
  const LinOp op = build_operator(planted, p);
  Vector w(p);
  for (Index j = 0; j < p; ++j) w(j) = rng.normal();
  Vector signal = apply_rows(op, x) * w;
  const double mean = signal.mean();
  const double sd = std::sqrt((signal.array() - mean).square().sum() /
                              std::max<double>(1.0, static_cast<double>(signal.size() - 1)));
  SyntheticData out;
  out.y.resize(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) out.y(i, 0) = signal(i) + sd / snr * rng.normal();
  out.x = std::move(x);
  out.planted = planted;
  return out;
}

}  // namespace

Matrix synthetic_spectra(const SyntheticConfig& cfg, std::uint64_t seed) {
  check(cfg);
  Rng rng(seed);
  return spectra(cfg, rng);
}

SyntheticData planted_derivative(std::uint64_t seed, const SyntheticConfig& cfg) {
  check(cfg);
  Rng rng(seed);
  Matrix x = spectra(cfg, rng);
  return respond(std::move(x), OperatorSpec::finite_diff_first(), cfg.snr, rng);
}

SyntheticData planted_chain(std::uint64_t seed, const SyntheticConfig& cfg) {
  check(cfg);
  Rng rng(seed);
  Matrix x = spectra(cfg, rng);
  const OperatorSpec chain = OperatorSpec::compose(
      {OperatorSpec::finite_diff_first(), OperatorSpec::savgol_smooth(11, 2)});
  return respond(std::move(x), chain, cfg.snr, rng);
}

SyntheticData planted_classes(std::uint64_t seed, const SyntheticConfig& cfg) {
  SyntheticData d = planted_derivative(seed, cfg);
  std::vector<double> sorted(d.y.data(), d.y.data() + d.y.size());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted[sorted.size() / 3], hi = sorted[2 * sorted.size() / 3];
  d.labels.resize(static_cast<std::size_t>(d.y.rows()));
  for (Index i = 0; i < d.y.rows(); ++i)
    d.labels[static_cast<std::size_t>(i)] = d.y(i, 0) < lo ? 0 : (d.y(i, 0) < hi ? 1 : 2);
  return d;
}

}  // namespace aomcal
