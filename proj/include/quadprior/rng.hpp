#pragma once

#include <cstdint>
#include <string_view>

namespace qp {

// SplitMix64 finalizer. The whole RNG contract is built on this one function,
// so identical seeds produce identical byte streams on every platform.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Labeled sub-seed derivation: one master seed fans out into independent
// streams via FNV-1a over the label, mixed with the master.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index);

// Counter-based stream: draw i is a pure function of (key, i). Splitting a
// stream per pixel/item is just deriving a new key, so parallel and
// sequential execution agree bit-exactly.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++ ^ 0xd1b54a32d192ed03ull)); }

  // Uniform in [0,1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double next_gauss();

  // Poisson draw: inverse-transform below POISSON_NORMAL_CROSSOVER,
  // rounded normal approximation above.
  long next_poisson(double lambda);

  static constexpr double POISSON_NORMAL_CROSSOVER = 30.0;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qp
