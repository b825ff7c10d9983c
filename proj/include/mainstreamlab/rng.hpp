#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace mainstreamlab {

// Named substream seed: splitmix64 over the root seed mixed with the FNV-1a
// hash of the stream label, e.g. "recsys/M_R_APC_country/low/FI/fold1".
// Partial reruns that use the same labels see the same random streams.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Seeded generator with platform-independent derived draws. std::mt19937_64
// output is fully specified by the standard; the distributions in <random>
// are not, so uniform reals, bounded integers and shuffles are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mainstreamlab
