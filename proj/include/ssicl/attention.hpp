#pragma once

#include <vector>

#include "ssicl/estimators.hpp"
#include "ssicl/gmm.hpp"
#include "ssicl/types.hpp"

namespace ssicl {

/// Gains of one constructed linear-attention layer: W_q W_k^T = diag(I_d, 0)
/// and W_v = diag(a I_d, b).
struct AttnLayerParams {
  double a = 0.0;  // feature-update gain
  double b = 0.0;  // label-update gain
};

/// L stacked layers with residual connections and head h = [0_d, head_scale].
/// A looped stack applies `layers[0]` `loops` times.
struct AttnStack {
  std::vector<AttnLayerParams> layers;
  double head_scale = 1.0;
  bool looped = false;
  int loops = 1;

  int depth() const { return looped ? loops : static_cast<int>(layers.size()); }
  const AttnLayerParams& layer(int index) const { return looped ? layers.front() : layers[index]; }
};

AttnStack make_stack(std::vector<AttnLayerParams> layers, double head_scale);
AttnStack make_looped_stack(AttnLayerParams layer, int loops, double head_scale);
/// Copy of a looped stack with its layer written out `loops` times.
AttnStack unroll(const AttnStack& stack);

/// Token state between layers: demonstration features/labels and the query
/// token (features and label slot).
struct AttnState {
  Matrix x;
  Vector y;
  Vector query;
  double query_label = 0.0;
};

AttnState initial_state(const Prompt& prompt);

/// Label slot of the query token in att(Z; W); the mask keeps the query out
/// of the keys and values.
double attention_query_label(const AttnState& state, const AttnLayerParams& params);

/// Z + att(Z; W) for the constructed weights.
AttnState attn_layer_forward(const AttnState& state, const AttnLayerParams& params);

/// h^T att(Z_L; W_L)_{n+1}: the last block's output at the query label slot.
double stack_forward(const Prompt& prompt, const AttnStack& stack);
double stack_forward(const Matrix& x, const Vector& y_obs, const Vector& query,
                     const AttnStack& stack);

inline constexpr int kMaxExtractDepth = 6;

/// Largest power of X^T X an L-layer stack can produce: (3^L - 3) / 2.
int max_poly_degree(int depth);

/// Coefficients of the polynomial in X^T X realized by the stack, obtained by
/// composing the per-layer scalar updates exactly.
PolyCoeffs extract_poly_coeffs(const AttnStack& stack);

/// Same coefficients recovered by interpolation: the stack is evaluated on
/// the 1x1 instance X = sqrt(t), y = 1, x = 1 at Chebyshev points on
/// [0.5, 2] and the Vandermonde system is solved. Only well conditioned for
/// shallow stacks. `degree < 0` selects max_poly_degree(depth).
PolyCoeffs interpolate_poly_coeffs(const AttnStack& stack, int degree = -1);

}  // namespace ssicl
