#pragma once

#include <cmath>
#include <cstdint>

namespace qpsim {

/// Deterministic splitmix64 stream. Every stochastic component of the library
/// draws from these streams, so runs are bit-reproducible for a given seed and
/// compared policies can consume identical substreams (common random numbers).
/// Distribution sampling is implemented by hand (Box-Muller, Knuth) instead of
/// <random> distributions, whose output is implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Normal draw via Box-Muller; consumes exactly two uniforms per call.
  double next_normal(double mean, double stddev) {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Poisson draw via Knuth's product method; fine for the small rates used here.
  int next_poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Derives an independent substream from (seed, tag, keys). Identical keys
/// always yield the identical stream; distinct keys yield unrelated streams.
inline RandomStream substream(std::uint64_t seed, std::uint64_t tag,
                              std::uint64_t k1 = 0, std::uint64_t k2 = 0,
                              std::uint64_t k3 = 0) {
  std::uint64_t h = detail::mix64(seed ^ 0x2545f4914f6cdd1dULL);
  h = detail::mix64(h ^ tag);
  h = detail::mix64(h ^ k1);
  h = detail::mix64(h ^ k2);
  h = detail::mix64(h ^ k3);
  return RandomStream(h);
}

/// Substream tags; one per independent random purpose.
namespace stream_tag {
inline constexpr std::uint64_t topology = 0x01;
inline constexpr std::uint64_t arrivals = 0x02;
inline constexpr std::uint64_t endpoints = 0x03;
inline constexpr std::uint64_t initial_fidelity = 0x04;
inline constexpr std::uint64_t cascade = 0x05;
inline constexpr std::uint64_t dataset = 0x06;
inline constexpr std::uint64_t weight_init = 0x07;
inline constexpr std::uint64_t shuffle = 0x08;
inline constexpr std::uint64_t split = 0x09;
}  // namespace stream_tag

}  // namespace qpsim
