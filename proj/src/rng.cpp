#include "ssicl/rng.hpp"

namespace ssicl {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double RandomStream::chi_squared(int dof) {
  if (dof <= 0) return 0.0;
  std::chi_squared_distribution<double> dist(static_cast<double>(dof));
  return dist(engine_);
}

int RandomStream::binomial(int n, double p) {
  std::binomial_distribution<int> dist(n, p);
  return dist(engine_);
}

}  // namespace ssicl
