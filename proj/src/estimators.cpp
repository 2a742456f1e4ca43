#include "ssicl/estimators.hpp"

#include <cmath>

#include "ssicl/error.hpp"

namespace ssicl {

Vector spi(const SemiDataset& data) { return spi(data.x, data.y_obs); }

Vector spi(const Matrix& x, const Vector& y_obs) {
  if (y_obs.size() != x.rows()) fail(ErrorCategory::invalid_argument, "label length mismatch");
  const auto labeled = (y_obs.array() != 0.0).count();
  if (labeled == 0) fail(ErrorCategory::no_labeled_data, "no labeled demonstrations");
  return x.transpose() * y_obs / static_cast<double>(labeled);
}

Vector debiased_cov_apply(const Matrix& x, double sigma, const Vector& v) {
  const double n = static_cast<double>(x.rows());
  return x.transpose() * (x * v) / n - sigma * sigma * v;
}

Vector sspi_k(const SemiDataset& data, double sigma, int k, double alpha) {
  return sspi_k(data.x, data.y_obs, sigma, k, alpha);
}

Vector sspi_k(const Matrix& x, const Vector& y_obs, double sigma, int k, double alpha) {
  if (k < 0) fail(ErrorCategory::invalid_argument, "k must be nonnegative");
  const Vector mu_s = spi(x, y_obs);
  Vector powered = mu_s;
  for (int i = 0; i < k; ++i) powered = debiased_cov_apply(x, sigma, powered);
  return alpha * mu_s + (1.0 - alpha) * powered;
}

EigenEstimate top_eigenvector(const Matrix& sym, const Vector& start, double tol, int max_iter) {
  const auto d = sym.rows();
  EigenEstimate out;
  Vector v = start;
  if (v.size() != d || !(v.norm() > 0.0) || !v.allFinite()) v = Vector::Unit(d, 0);
  v.normalize();

  // Shift by an upper bound on the spectral radius so that the dominant
  // eigenvalue of the shifted matrix is the algebraically largest of `sym`.
  const double shift = sym.cwiseAbs().rowwise().sum().maxCoeff();
  if (shift == 0.0) {
    out.vector = v;
    out.eigenvalue = 0.0;
    out.converged = true;
    return out;
  }

  for (int it = 1; it <= max_iter; ++it) {
    Vector next = sym * v + shift * v;
    const double norm = next.norm();
    if (!(norm > 0.0)) break;
    next /= norm;
    const double step = (next - v).norm();
    v = std::move(next);
    out.iterations_used = it;
    if (step < tol) {
      out.converged = true;
      break;
    }
  }
  out.ill_conditioned = !out.converged;
  out.vector = v;
  out.eigenvalue = v.dot(sym * v);
  return out;
}

SspiInfResult sspi_inf(const SemiDataset& data, double sigma, double alpha, double tol,
                       int max_iter) {
  return sspi_inf(data.x, data.y_obs, sigma, alpha, tol, max_iter);
}

SspiInfResult sspi_inf(const Matrix& x, const Vector& y_obs, double sigma, double alpha,
                       double tol, int max_iter) {
  const Vector mu_s = spi(x, y_obs);
  const double n = static_cast<double>(x.rows());
  Matrix cov = x.transpose() * x / n;
  cov.diagonal().array() -= sigma * sigma;

  SspiInfResult out;
  out.eigen = top_eigenvector(cov, mu_s, tol, max_iter);
  const Vector& u = out.eigen.vector;
  out.estimate = alpha * mu_s + (1.0 - alpha) * u.dot(mu_s) * u;
  return out;
}

double poly_predict(const Vector& x_query, const SemiDataset& data, const PolyCoeffs& coeffs) {
  return poly_predict(x_query, data.x, data.y_obs, coeffs);
}

double poly_predict(const Vector& x_query, const Matrix& x, const Vector& y_obs,
                    const PolyCoeffs& coeffs) {
  if (coeffs.coeffs.empty()) return 0.0;
  const Vector base = x.transpose() * y_obs;
  const int degree = coeffs.degree();
  Vector acc = coeffs.coeffs[degree] * base;
  for (int i = degree - 1; i >= 0; --i) acc = x.transpose() * (x * acc) + coeffs.coeffs[i] * base;
  return x_query.dot(acc);
}

Vector em_label_step(const SemiDataset& data, const Vector& labels, double c) {
  return em_label_step(data.x, labels, c);
}

Vector em_label_step(const Matrix& x, const Vector& labels, double c) {
  if (labels.size() != x.rows()) fail(ErrorCategory::invalid_argument, "label length mismatch");
  return labels + c * (x * (x.transpose() * labels));
}

Matrix softmax_similarity(const Matrix& x) {
  Matrix s = x * x.transpose();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double row_max = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - row_max).exp();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

Vector bp_label_step(const SemiDataset& data, const Vector& labels, double c) {
  return bp_label_step(data.x, labels, c);
}

Vector bp_label_step(const Matrix& x, const Vector& labels, double c) {
  if (labels.size() != x.rows()) fail(ErrorCategory::invalid_argument, "label length mismatch");
  return labels + c * (softmax_similarity(x) * labels);
}

}  // namespace ssicl
