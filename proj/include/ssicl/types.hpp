#pragma once

#include <Eigen/Dense>

namespace ssicl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Classification rule shared by every predictor: sign(0) is +1.
inline double sign_label(double score) noexcept { return score >= 0.0 ? 1.0 : -1.0; }

}  // namespace ssicl
