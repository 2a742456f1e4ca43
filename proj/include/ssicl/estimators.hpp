#pragma once

#include <vector>

#include "ssicl/gmm.hpp"
#include "ssicl/types.hpp"

namespace ssicl {

/// Coefficients a_0..a_K of the estimator sum_i a_i (X^T X)^i X^T y.
struct PolyCoeffs {
  std::vector<double> coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
};

/// Power-iteration result for the top eigenvector of the debiased covariance.
struct EigenEstimate {
  Vector vector;
  double eigenvalue = 0.0;
  int iterations_used = 0;
  bool converged = false;
  // Set when the iteration stalled, which happens when the two leading
  // eigenvalues are (nearly) equal.
  bool ill_conditioned = false;
};

struct SspiInfResult {
  Vector estimate;
  EigenEstimate eigen;
};

inline constexpr double kPowerTol = 1e-10;
inline constexpr int kPowerMaxIter = 10000;

/// Supervised plug-in mean: average of y_i x_i over revealed labels.
Vector spi(const SemiDataset& data);
/// Same on raw arrays; labeled rows are those with y_obs != 0.
Vector spi(const Matrix& x, const Vector& y_obs);

/// (X^T X / n - sigma^2 I) v via two matrix-vector products.
Vector debiased_cov_apply(const Matrix& x, double sigma, const Vector& v);

/// alpha * mu_s + (1 - alpha) * (X^T X / n - sigma^2 I)^k mu_s.
Vector sspi_k(const SemiDataset& data, double sigma, int k, double alpha);
Vector sspi_k(const Matrix& x, const Vector& y_obs, double sigma, int k, double alpha);

/// Top (algebraically largest) eigenpair of a symmetric matrix by shifted
/// power iteration, starting from `start`.
EigenEstimate top_eigenvector(const Matrix& sym, const Vector& start, double tol = kPowerTol,
                              int max_iter = kPowerMaxIter);

/// alpha * mu_s + (1 - alpha) (u^T mu_s) u with u the top eigenvector of
/// X^T X / n - sigma^2 I.
SspiInfResult sspi_inf(const SemiDataset& data, double sigma, double alpha,
                       double tol = kPowerTol, int max_iter = kPowerMaxIter);
SspiInfResult sspi_inf(const Matrix& x, const Vector& y_obs, double sigma, double alpha,
                       double tol = kPowerTol, int max_iter = kPowerMaxIter);

/// x_query^T sum_i a_i (X^T X)^i X^T y_obs, evaluated by Horner's rule with
/// matrix-vector products only.
double poly_predict(const Vector& x_query, const SemiDataset& data, const PolyCoeffs& coeffs);
double poly_predict(const Vector& x_query, const Matrix& x, const Vector& y_obs,
                    const PolyCoeffs& coeffs);

/// labels + c X X^T labels (linear-attention / EM-style pseudo-label update).
Vector em_label_step(const SemiDataset& data, const Vector& labels, double c);
Vector em_label_step(const Matrix& x, const Vector& labels, double c);

/// Row-stochastic similarity: row-wise softmax of X X^T.
Matrix softmax_similarity(const Matrix& x);

/// labels + c S labels with S = softmax_similarity(X) (softmax attention).
Vector bp_label_step(const SemiDataset& data, const Vector& labels, double c);
Vector bp_label_step(const Matrix& x, const Vector& labels, double c);

}  // namespace ssicl
