#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cfnoma {

// Deterministic RNG wrapper. Distribution transforms are implemented here
// (not via std:: distributions, whose output is implementation-defined) so
// that a seed pins down every draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1), safe for log()
  double uniform_open() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // N(0, 1) via Box-Muller
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // CN(0, 1): real and imaginary parts N(0, 1/2)
  std::complex<double> cnormal() {
    static const double s = std::sqrt(0.5);
    return {s * normal(), s * normal()};
  }

  // Logistic(0, 1) noise, the difference of two standard Gumbels
  double logistic() {
    const double u = uniform_open();
    return std::log(u) - std::log1p(-u);
  }

  // Gumbel(0, 1)
  double gumbel_noise() { return -std::log(-std::log(uniform_open())); }

  // Independent stream derived from (seed, key); identical regardless of how
  // many draws were taken from this stream.
  Rng substream(std::uint64_t key) const { return Rng(mix(seed_, key)); }

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined word
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cfnoma
