#pragma once

// Seeded synthetic spectra with a planted linear operator in the response.
//
// Rows are up to five Gaussian bands with random concentrations on top of a
// baseline (offset, slope) and a random-walk drift, plus small white noise.
// The response is <A x, w> for the planted operator A, with Gaussian noise at
// the requested signal-to-noise ratio (ratio of standard deviations).

#include <cstdint>
#include <vector>

#include "aomcal/operators.hpp"
#include "aomcal/types.hpp"

namespace aomcal {

struct SyntheticConfig {
  Index n = 150;
  Index p = 256;
  double snr = 10.0;
  int bands = 5;
  double width_min = 4.0;  // band standard deviation in channels
  double width_max = 20.0;
  double offset_sd = 2.0;
  double slope_sd = 1.0;   // total rise across the spectrum
  double drift_sd = 0.02;  // random-walk increment
  double white_sd = 0.002;
};

struct SyntheticData {
  Matrix x;
  Matrix y;  // n x 1
  std::vector<int> labels;  // filled by the classification generator
  OperatorSpec planted;
};

/// Spectra only.
Matrix synthetic_spectra(const SyntheticConfig& cfg, std::uint64_t seed);

/// y = <D x, w> + noise with D the first finite difference.
SyntheticData planted_derivative(std::uint64_t seed, const SyntheticConfig& cfg = {});

/// y = <D S x, w> + noise with S the order-2 window-11 SG smoother and D the
/// first finite difference; `planted` is compose(D, S).
SyntheticData planted_chain(std::uint64_t seed, const SyntheticConfig& cfg = {});

/// Three classes from the tertiles of the planted-derivative response.
SyntheticData planted_classes(std::uint64_t seed, const SyntheticConfig& cfg = {});

}  // namespace aomcal
