#pragma once

#include <vector>

#include "ssicl/rng.hpp"
#include "ssicl/types.hpp"

namespace ssicl {

/// One binary GMM classification task: class means are +mu and -mu.
struct TaskSpec {
  Vector mu;           // unit norm
  double sigma = 1.0;  // isotropic noise std

  int d() const { return static_cast<int>(mu.size()); }
};

/// Demonstrations of a semi-supervised task. Rows of `x` are samples;
/// `y_obs` holds the revealed label or 0 when the label is hidden.
struct SemiDataset {
  Matrix x;
  Vector y_true;
  Vector y_obs;
  std::vector<int> labeled_idx;
  double p = 1.0;

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
  int num_labeled() const { return static_cast<int>(labeled_idx.size()); }
};

/// In-context prompt: (n+1) x (d+1) tokens, last row is [query_x, 0].
struct Prompt {
  Matrix z;
  Vector query_x;
  double query_y_true = 1.0;

  int n() const { return static_cast<int>(z.rows()) - 1; }
  int d() const { return static_cast<int>(z.cols()) - 1; }
  Matrix features() const { return z.topLeftCorner(n(), d()); }
  Vector labels() const { return z.col(d()).head(n()); }
};

TaskSpec sample_task(int d, double sigma, RandomStream& rng);

/// Draws labels uniformly, features x_i = y_i mu + sigma g_i, then reveals
/// each label with probability p. With `require_labeled` only the reveal
/// mask is redrawn until at least one label is visible.
SemiDataset generate_dataset(const TaskSpec& task, int n, double p, RandomStream& rng,
                             bool require_labeled = false);

/// Assembles a dataset from explicit arrays, deriving the labeled index set
/// from the nonzero entries of `y_obs`.
SemiDataset make_dataset(Matrix x, Vector y_true, Vector y_obs, double p = 1.0);

/// A fresh labeled query drawn from `task`.
struct Query {
  Vector x;
  double y = 1.0;
};
Query draw_query(const TaskSpec& task, RandomStream& rng);

/// Draws a fresh query from `task` and stacks it under the demonstrations.
Prompt build_prompt(const SemiDataset& data, const TaskSpec& task, RandomStream& rng);

/// Prompt with a caller-supplied query (no randomness).
Prompt make_prompt(const Matrix& x, const Vector& y_obs, const Vector& query_x,
                   double query_y_true);

}  // namespace ssicl
