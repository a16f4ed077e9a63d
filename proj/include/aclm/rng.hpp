#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace aclm {

// Seeded random source used everywhere randomness is specified.
// The uniform/normal draws are implemented by hand (not via std::*_distribution,
// whose output is implementation-defined) so that a given seed produces the
// same stream on every platform and toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  /// Uniform double in [0, 1).
  double unit();

  /// Normal draw via Box-Muller. sigma == 0 returns mu exactly.
  double gaussian(double mu, double sigma);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a over arbitrary bytes; also used for content digests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ull);

/// Deterministic per-record seed from (run seed, item tag, counter).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t counter);

}  // namespace aclm
