#include "aclm/rng.hpp"

#include <cmath>
#include <numbers>

namespace aclm {

std::size_t Rng::below(std::size_t n) {
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

double Rng::unit() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian(double mu, double sigma) {
  if (sigma == 0.0) return mu;
  double u1;
  do {
    u1 = unit();
  } while (u1 <= 0.0);
  const double u2 = unit();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  return mu + sigma * mag * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

// splitmix64 finalizer; spreads low-entropy inputs over the full range.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t counter) {
  std::uint64_t h = fnv1a64(tag);
  h = mix64(h ^ mix64(base));
  h = mix64(h ^ counter);
  return h;
}

}  // namespace aclm
