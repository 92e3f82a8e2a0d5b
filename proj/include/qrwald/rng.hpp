#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qrwald {

// splitmix64 finalizer; spreads structured keys into well-mixed 64-bit seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t k : keys) s = mix64(s ^ mix64(k));
  return s;
}

// Uniform stream over mt19937_64 with an explicit bit mapping, so sequences
// are identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Strictly inside (0, 1).
  double uniform01() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace qrwald
