#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace aomcal {

/// Seeded generator with platform-stable uniform/normal draws.
///
/// std::mt19937_64 is bit-specified by the standard but the <random>
/// distributions are not, so the draws are derived from the raw engine output.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                      // [0, 1)
  double normal();                       // standard normal, Box-Muller
  std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent sub-stream for worker `index`; keeps results independent of worker count.
  static Rng substream(std::uint64_t seed, std::uint64_t index);

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aomcal
