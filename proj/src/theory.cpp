#include "ssicl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <vector>

#include "ssicl/error.hpp"
#include "ssicl/parallel.hpp"

namespace ssicl {
namespace {

constexpr int kShards = 64;

// a / sigma with the sigma -> 0+ limit taken for a != 0.
double over_sigma(double a, double sigma) {
  if (sigma > 0.0) return a / sigma;
  if (a == 0.0) return 0.0;
  return a > 0.0 ? std::numeric_limits<double>::infinity()
                 : -std::numeric_limits<double>::infinity();
}

}  // namespace

double q_function(double x) {
  if (std::isnan(x)) return x;
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

ErrorEstimate spi_error(int n, double p, double sigma, int d, long trials, RandomStream& rng,
                        LabelCount label_count, int threads) {
  if (n < 1 || d < 1) fail(ErrorCategory::invalid_argument, "n and d must be positive");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCategory::invalid_argument, "p must lie in [0, 1]");
  if (!(n * p > 0.0)) fail(ErrorCategory::undefined_estimator, "SPI error is undefined for np = 0");
  if (trials < 1) fail(ErrorCategory::invalid_argument, "trials must be >= 1");
  if (!(sigma >= 0.0)) fail(ErrorCategory::invalid_argument, "sigma must be nonnegative");
  if (sigma == 0.0) return ErrorEstimate{0.0, 0.0, ErrorMethod::analytic};

  // Law of m given m >= 1.
  std::vector<double> weights;
  if (label_count == LabelCount::binomial) {
    weights.assign(static_cast<std::size_t>(n), 0.0);
    const double log_p = std::log(p);
    const double log_q = p < 1.0 ? std::log1p(-p) : 0.0;
    for (int m = 1; m <= n; ++m) {
      if (p == 1.0 && m != n) continue;
      const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) -
                             std::lgamma(n - m + 1.0) + m * log_p + (n - m) * log_q;
      weights[static_cast<std::size_t>(m - 1)] = std::exp(log_pmf);
    }
  }

  const std::uint64_t base_seed = rng.next_u64();
  std::vector<double> sums(kShards, 0.0), sq_sums(kShards, 0.0);
  parallel_for(kShards, threads, [&](std::int64_t shard) {
    const long count = trials / kShards + (shard < trials % kShards ? 1 : 0);
    RandomStream local(derive_seed(base_seed, static_cast<std::uint64_t>(shard)));
    std::discrete_distribution<int> draw_m;
    if (label_count == LabelCount::binomial) draw_m = {weights.begin(), weights.end()};
    const double fixed_eps = sigma / std::sqrt(n * p);
    double sum = 0.0, sq = 0.0;
    for (long t = 0; t < count; ++t) {
      const double eps = label_count == LabelCount::binomial
                             ? sigma / std::sqrt(1.0 + draw_m(local.engine()))
                             : fixed_eps;
      const double g = local.normal();
      const double h = local.chi_squared(d - 1);
      const double num = 1.0 + eps * g;
      const double den = sigma * std::sqrt(num * num + eps * eps * h);
      const double value = q_function(num / den);
      sum += value;
      sq += value * value;
    }
    sums[static_cast<std::size_t>(shard)] = sum;
    sq_sums[static_cast<std::size_t>(shard)] = sq;
  });

  double sum = 0.0, sq = 0.0;
  for (int s = 0; s < kShards; ++s) {
    sum += sums[static_cast<std::size_t>(s)];
    sq += sq_sums[static_cast<std::size_t>(s)];
  }
  const double mean = sum / static_cast<double>(trials);
  const double var = std::max(0.0, sq / static_cast<double>(trials) - mean * mean);
  return ErrorEstimate{mean, std::sqrt(var / static_cast<double>(trials)), ErrorMethod::monte_carlo};
}

double spi_error_upper(int n, double p, double sigma, int d) {
  const double np = n * p;
  if (!(np > 0.0)) fail(ErrorCategory::undefined_estimator, "SPI bound is undefined for np = 0");
  const double eps_sq = sigma * sigma / np;
  const double tail = eps_sq > 0.0 ? std::exp(-1.0 / (8.0 * eps_sq)) : 0.0;
  const double bound =
      q_function(over_sigma(1.0 - 10.0 * d * eps_sq, sigma)) + std::exp(-static_cast<double>(d)) + tail;
  return std::clamp(bound, 0.0, 1.0);
}

double oracle_error(double np, double sigma) {
  if (!(np >= 0.0)) fail(ErrorCategory::invalid_argument, "np must be nonnegative");
  const double bayes = q_function(over_sigma(1.0, sigma));
  const double sign_err = q_function(over_sigma(std::sqrt(np), sigma));
  return bayes + sign_err - 2.0 * bayes * sign_err;
}

LabelMoments label_moments(int n, double p) {
  const double mean = n * p;
  return LabelMoments{mean, mean * (1.0 - p) + mean * mean};
}

double w_star_scalar(int n, double p, double sigma, int d) {
  const LabelMoments m = label_moments(n, p);
  if (!(m.mean > 0.0)) fail(ErrorCategory::undefined_estimator, "W* is undefined for np = 0");
  const double s2 = sigma * sigma;
  return 1.0 / ((1.0 + s2) * m.second / m.mean + s2 + s2 * s2 * d);
}

double reduced_loss(const Matrix& w, int n, double p, double sigma, int d) {
  if (w.rows() != d || w.cols() != d) fail(ErrorCategory::invalid_argument, "W must be d x d");
  const LabelMoments m = label_moments(n, p);
  const double dd = static_cast<double>(d);
  const double s2 = sigma * sigma;
  const double tr = w.trace();
  const double tr_wwt = w.squaredNorm();
  const double tr_w2 = (w * w).trace();
  return m.second / (dd * (dd + 2.0)) * (tr * tr + tr_wwt + tr_w2) +
         (m.mean + m.second) / dd * s2 * tr_wwt + m.mean * s2 * s2 * tr_wwt + 1.0 -
         2.0 * m.mean / dd * tr;
}

double nonasymp_bound(int n, int d, double sigma, double c_const) {
  if (n < 1) fail(ErrorCategory::invalid_argument, "n must be positive");
  const double shrink = c_const * std::sqrt(static_cast<double>(d) / n);
  return q_function(over_sigma(1.0 - shrink, sigma)) + std::exp(-static_cast<double>(d));
}

}  // namespace ssicl
