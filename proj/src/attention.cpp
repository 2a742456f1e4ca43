#include "ssicl/attention.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ssicl/error.hpp"

namespace ssicl {
namespace {

using Poly = std::vector<double>;

Poly poly_mul(const Poly& lhs, const Poly& rhs) {
  Poly out(lhs.size() + rhs.size() - 1, 0.0);
  for (std::size_t i = 0; i < lhs.size(); ++i)
    for (std::size_t j = 0; j < rhs.size(); ++j) out[i + j] += lhs[i] * rhs[j];
  return out;
}

// 1 + gain * t * base
Poly one_plus_shifted(double gain, const Poly& base) {
  Poly out(base.size() + 1, 0.0);
  out[0] = 1.0;
  for (std::size_t i = 0; i < base.size(); ++i) out[i + 1] = gain * base[i];
  return out;
}

void check_depth(int depth) {
  if (depth < 1) fail(ErrorCategory::invalid_argument, "attention stack needs at least one layer");
  if (depth > kMaxExtractDepth)
    fail(ErrorCategory::ill_conditioned,
         "polynomial extraction is ill-conditioned beyond depth " +
             std::to_string(kMaxExtractDepth) + "; use L <= 6");
}

}  // namespace

AttnStack make_stack(std::vector<AttnLayerParams> layers, double head_scale) {
  if (layers.empty()) fail(ErrorCategory::invalid_argument, "attention stack needs at least one layer");
  AttnStack stack;
  stack.layers = std::move(layers);
  stack.head_scale = head_scale;
  return stack;
}

AttnStack make_looped_stack(AttnLayerParams layer, int loops, double head_scale) {
  if (loops < 1) fail(ErrorCategory::invalid_argument, "looped stack needs loops >= 1");
  AttnStack stack;
  stack.layers = {layer};
  stack.head_scale = head_scale;
  stack.looped = true;
  stack.loops = loops;
  return stack;
}

AttnStack unroll(const AttnStack& stack) {
  std::vector<AttnLayerParams> layers;
  for (int l = 0; l < stack.depth(); ++l) layers.push_back(stack.layer(l));
  return make_stack(std::move(layers), stack.head_scale);
}

AttnState initial_state(const Prompt& prompt) {
  return AttnState{prompt.features(), prompt.labels(), prompt.query_x, 0.0};
}

double attention_query_label(const AttnState& state, const AttnLayerParams& params) {
  return params.b * state.query.dot(state.x.transpose() * state.y);
}

AttnState attn_layer_forward(const AttnState& state, const AttnLayerParams& params) {
  const Matrix gram = state.x.transpose() * state.x;  // X^T X
  const Vector xty = state.x.transpose() * state.y;
  AttnState next;
  next.x = state.x + params.a * (state.x * gram);
  next.y = state.y + params.b * (state.x * xty);
  next.query = state.query + params.a * (gram * state.query);
  next.query_label = state.query_label + params.b * state.query.dot(xty);
  return next;
}

double stack_forward(const Prompt& prompt, const AttnStack& stack) {
  return stack_forward(prompt.features(), prompt.labels(), prompt.query_x, stack);
}

double stack_forward(const Matrix& x, const Vector& y_obs, const Vector& query,
                     const AttnStack& stack) {
  const int depth = stack.depth();
  if (depth < 1) fail(ErrorCategory::invalid_argument, "attention stack needs at least one layer");
  AttnState state{x, y_obs, query, 0.0};
  for (int l = 0; l + 1 < depth; ++l) state = attn_layer_forward(state, stack.layer(l));
  return stack.head_scale * attention_query_label(state, stack.layer(depth - 1));
}

int max_poly_degree(int depth) {
  int pow3 = 1;
  for (int l = 0; l < depth; ++l) pow3 *= 3;
  return (pow3 - 3) / 2;
}

PolyCoeffs extract_poly_coeffs(const AttnStack& stack) {
  const int depth = stack.depth();
  check_depth(depth);
  // With S = X^T X: X_l = X P_l(S), x_l = P_l(S) x and X^T y_l = R_l(S) X^T y.
  Poly feature{1.0};
  Poly label{1.0};
  for (int l = 0; l + 1 < depth; ++l) {
    const AttnLayerParams& layer = stack.layer(l);
    const Poly feature_sq = poly_mul(feature, feature);
    label = poly_mul(label, one_plus_shifted(layer.b, feature_sq));
    feature = poly_mul(feature, one_plus_shifted(layer.a, feature_sq));
  }
  Poly out = poly_mul(poly_mul(feature, feature), label);
  const double scale = stack.head_scale * stack.layer(depth - 1).b;
  for (double& coeff : out) coeff *= scale;
  return PolyCoeffs{std::move(out)};
}

PolyCoeffs interpolate_poly_coeffs(const AttnStack& stack, int degree) {
  const int depth = stack.depth();
  check_depth(depth);
  if (degree < 0) degree = max_poly_degree(depth);
  const int points = degree + 1;

  Matrix vandermonde(points, points);
  Vector values(points);
  Matrix x(1, 1);
  Vector y = Vector::Ones(1);
  Vector query = Vector::Ones(1);
  for (int j = 0; j < points; ++j) {
    const double t =
        1.25 + 0.75 * std::cos((2.0 * j + 1.0) * std::numbers::pi / (2.0 * points));
    x(0, 0) = std::sqrt(t);
    values[j] = stack_forward(x, y, query, stack) / std::sqrt(t);
    double power = 1.0;
    for (int k = 0; k < points; ++k) {
      vandermonde(j, k) = power;
      power *= t;
    }
  }

  Eigen::JacobiSVD<Matrix> svd(vandermonde);
  const auto& sv = svd.singularValues();
  if (sv[sv.size() - 1] <= 0.0 || sv[0] / sv[sv.size() - 1] > 1e14)
    fail(ErrorCategory::ill_conditioned, "Vandermonde system is ill-conditioned; use L <= 6");

  const Vector solution = vandermonde.colPivHouseholderQr().solve(values);
  return PolyCoeffs{std::vector<double>(solution.data(), solution.data() + solution.size())};
}

}  // namespace ssicl
