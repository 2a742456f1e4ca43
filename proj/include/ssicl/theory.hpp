#pragma once

#include "ssicl/rng.hpp"
#include "ssicl/types.hpp"

namespace ssicl {

enum class ErrorMethod { analytic, quadrature, monte_carlo };

/// A misclassification probability and its Monte-Carlo standard error
/// (zero for closed forms).
struct ErrorEstimate {
  double value = 0.0;
  double std_err = 0.0;
  ErrorMethod method = ErrorMethod::analytic;
};

/// How the number of labeled demonstrations m enters the one-layer error.
enum class LabelCount {
  binomial,  // m ~ Binomial(n, p) conditioned on m >= 1, as in the data model
  fixed,     // m = n p exactly
};

/// P(N(0,1) > x).
double q_function(double x);

/// E[Q((1 + e g) / (sigma sqrt((1 + e g)^2 + e^2 h)))] with g ~ N(0,1),
/// h ~ chi^2_{d-1} and e = sigma / sqrt(m): the error of sign(x^T mu_s).
/// Monte-Carlo over `trials` draws, sharded so the result does not depend
/// on `threads`.
ErrorEstimate spi_error(int n, double p, double sigma, int d, long trials, RandomStream& rng,
                        LabelCount label_count = LabelCount::binomial, int threads = 1);

/// Q((1 - 10 d e^2) / sigma) + exp(-d) + exp(-1 / (8 e^2)), e^2 = sigma^2 / (n p),
/// clamped to [0, 1].
double spi_error_upper(int n, double p, double sigma, int d);

/// Error of sign(x^T mu mu^T mu_s):
/// Q(1/sigma) + Q(sqrt(np)/sigma) - 2 Q(1/sigma) Q(sqrt(np)/sigma).
double oracle_error(double np, double sigma);

/// E[m] and E[m^2] for m ~ Binomial(n, p).
struct LabelMoments {
  double mean = 0.0;
  double second = 0.0;
};
LabelMoments label_moments(int n, double p);

/// Scale c of the optimal one-layer preconditioner W* = c I.
double w_star_scalar(int n, double p, double sigma, int d);

/// Closed-form population loss E[(x^T W sum_{i in I} y_i x_i - y)^2].
double reduced_loss(const Matrix& w, int n, double p, double sigma, int d);

/// Q((1 - C sqrt(d/n)) / sigma) + exp(-d) for a caller-chosen constant C.
double nonasymp_bound(int n, int d, double sigma, double c_const);

}  // namespace ssicl
