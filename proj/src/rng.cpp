#include "quadprior/rng.hpp"

#include <cmath>
#include <numbers>

namespace qp {

namespace {
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return mix64(master ^ mix64(fnv1a(label)));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  return mix64(derive_seed(master, label) ^ mix64(index ^ 0xa0761d6478bd642full));
}

double CounterRng::next_gauss() {
  double u1 = next_unit();
  double u2 = next_unit();
  if (u1 <= 0.0) u1 = 0x1.0p-53;  // log(0) guard
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

long CounterRng::next_poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < POISSON_NORMAL_CROSSOVER) {
    // Inverse transform on a single uniform.
    double u = next_unit();
    double p = std::exp(-lambda);
    double cdf = p;
    long k = 0;
    while (u > cdf && k < 1000000) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  double k = std::llround(lambda + std::sqrt(lambda) * next_gauss());
  return k < 0 ? 0 : static_cast<long>(k);
}

}  // namespace qp
