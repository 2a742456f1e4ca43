#pragma once

#include <cstdint>
#include <random>

namespace ssicl {

/// SplitMix64 finalizer; maps (base seed, stream id) to an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) noexcept;

/// A seeded random stream. Every operation that consumes randomness takes
/// one of these explicitly; there is no global generator.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform_(engine_) < p; }
  /// Uniform on {-1, +1}.
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }
  double chi_squared(int dof);
  /// Binomial(n, p) draw.
  int binomial(int n, double p);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ssicl
