#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pulsepp {

/// splitmix64 finalizer; also used to derive per-task seeds from a master
/// seed by counter, so worker scheduling can never change a stream.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of the n-th child stream of `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Deterministic random stream. The raw engine is std::mt19937_64 (its
/// output sequence is fixed by the standard); all distributions are
/// implemented here rather than through std:: distribution objects, whose
/// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; generates pairs, caches the spare.
  double normal();

  /// Poisson draw. Sequential inversion below mean 30, transformed
  /// rejection (PTRS) above. mean must be >= 0; mean == 0 yields 0.
  std::uint64_t poisson(double mean);

  /// Uniform integer in [0, n) by rejection (unbiased). n must be > 0.
  std::uint64_t bounded(std::uint64_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[bounded(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pulsepp
