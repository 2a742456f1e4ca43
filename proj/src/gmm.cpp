#include "ssicl/gmm.hpp"

#include <string>

#include "ssicl/error.hpp"

namespace ssicl {

TaskSpec sample_task(int d, double sigma, RandomStream& rng) {
  if (d < 1) fail(ErrorCategory::invalid_argument, "invalid dimension: d must be >= 1");
  if (!(sigma >= 0.0)) fail(ErrorCategory::invalid_argument, "sigma must be nonnegative");
  TaskSpec task;
  task.sigma = sigma;
  task.mu.resize(d);
  double norm = 0.0;
  // A zero-norm Gaussian draw has probability zero but is retried anyway.
  while (norm == 0.0) {
    for (int j = 0; j < d; ++j) task.mu[j] = rng.normal();
    norm = task.mu.norm();
  }
  task.mu /= norm;
  return task;
}

SemiDataset generate_dataset(const TaskSpec& task, int n, double p, RandomStream& rng,
                             bool require_labeled) {
  if (n < 1) fail(ErrorCategory::invalid_argument, "n must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCategory::invalid_argument, "p must lie in [0, 1]");
  if (require_labeled && p == 0.0)
    fail(ErrorCategory::invalid_argument, "require_labeled is unsatisfiable with p = 0");

  const int d = task.d();
  SemiDataset data;
  data.p = p;
  data.x.resize(n, d);
  data.y_true.resize(n);
  data.y_obs.setZero(n);

  for (int i = 0; i < n; ++i) {
    const double label = rng.rademacher();
    data.y_true[i] = label;
    for (int j = 0; j < d; ++j) data.x(i, j) = label * task.mu[j] + task.sigma * rng.normal();
  }

  do {
    data.labeled_idx.clear();
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(p)) {
        data.labeled_idx.push_back(i);
        data.y_obs[i] = data.y_true[i];
      } else {
        data.y_obs[i] = 0.0;
      }
    }
  } while (require_labeled && data.labeled_idx.empty());

  return data;
}

SemiDataset make_dataset(Matrix x, Vector y_true, Vector y_obs, double p) {
  if (y_true.size() != x.rows() || y_obs.size() != x.rows())
    fail(ErrorCategory::invalid_argument, "label vectors must have one entry per row of x");
  SemiDataset data;
  data.p = p;
  for (Eigen::Index i = 0; i < y_obs.size(); ++i) {
    if (y_obs[i] != 0.0) {
      if (y_obs[i] != y_true[i])
        fail(ErrorCategory::invalid_argument,
             "observed label disagrees with true label at row " + std::to_string(i));
      data.labeled_idx.push_back(static_cast<int>(i));
    }
  }
  data.x = std::move(x);
  data.y_true = std::move(y_true);
  data.y_obs = std::move(y_obs);
  return data;
}

Prompt make_prompt(const Matrix& x, const Vector& y_obs, const Vector& query_x,
                   double query_y_true) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (query_x.size() != d) fail(ErrorCategory::invalid_argument, "query dimension mismatch");
  Prompt prompt;
  prompt.z.resize(n + 1, d + 1);
  prompt.z.topLeftCorner(n, d) = x;
  prompt.z.col(d).head(n) = y_obs;
  prompt.z.row(n).head(d) = query_x.transpose();
  prompt.z(n, d) = 0.0;
  prompt.query_x = query_x;
  prompt.query_y_true = query_y_true;
  return prompt;
}

Query draw_query(const TaskSpec& task, RandomStream& rng) {
  Query query;
  query.y = rng.rademacher();
  query.x.resize(task.d());
  for (int j = 0; j < task.d(); ++j) query.x[j] = query.y * task.mu[j] + task.sigma * rng.normal();
  return query;
}

Prompt build_prompt(const SemiDataset& data, const TaskSpec& task, RandomStream& rng) {
  if (data.d() != task.d())
    fail(ErrorCategory::invalid_argument, "dataset and task dimensions differ");
  Query query = draw_query(task, rng);
  return make_prompt(data.x, data.y_obs, query.x, query.y);
}

}  // namespace ssicl
