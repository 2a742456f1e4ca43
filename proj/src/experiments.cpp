#include "ssicl/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "ssicl/error.hpp"
#include "ssicl/gmm.hpp"
#include "ssicl/parallel.hpp"

namespace ssicl {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_problem(int d, double sigma, int n, double p) {
  require(d >= 1, ErrorCategory::invalid_argument, "d must be at least 1");
  require(n >= 1, ErrorCategory::invalid_argument, "n must be at least 1");
  require(sigma >= 0.0, ErrorCategory::invalid_argument, "sigma must be nonnegative");
  require(p >= 0.0 && p <= 1.0, ErrorCategory::invalid_argument, "p must lie in [0, 1]");
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Training works in normalized gains a_hat = a n, b_hat = b n so that every
// power of X^T X appears as a power of S = X^T X / n. The prediction is then
// sum_k q_k psi_k with psi_k = x^T S^k X^T y / n and q the coefficients of
// the stack with gains (a_hat, b_hat).
struct FeatureSet {
  int width = 0;                // K + 1
  std::vector<double> psi;      // row-major, one row per prompt
  std::vector<double> label;    // true query labels

  std::size_t size() const { return label.size(); }
  const double* row(std::size_t i) const { return psi.data() + i * static_cast<std::size_t>(width); }
};

// Sum and Gram matrix of k iid N(0, I_d) rows. For k > d + 1 the Gram matrix
// is drawn as s s^T / k plus an independent Wishart(k - 1) scatter (Bartlett).
void gaussian_block(int k, int d, RandomStream& rng, Vector& sum, Matrix& gram) {
  sum.setZero(d);
  gram.setZero(d, d);
  if (k <= 0) return;
  if (k <= d + 1) {
    Vector h(d);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) h[j] = rng.normal();
      sum += h;
      gram.noalias() += h * h.transpose();
    }
    return;
  }
  for (int j = 0; j < d; ++j) sum[j] = std::sqrt(static_cast<double>(k)) * rng.normal();
  Matrix a = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    a(j, j) = std::sqrt(rng.chi_squared(k - 1 - j));
    for (int i = j + 1; i < d; ++i) a(i, j) = rng.normal();
  }
  gram.noalias() = a * a.transpose();
  gram.noalias() += sum * sum.transpose() / static_cast<double>(k);
}

// Draws (X^T y_obs, X^T X, query) from their joint law without materializing
// X. With h_i = y_i g_i iid N(0, I), x_i = y_i (mu + sigma h_i), so
// X^T y_obs = m mu + sigma sum_I h_i and
// X^T X = n mu mu^T + sigma (mu s^T + s mu^T) + sigma^2 sum_i h_i h_i^T.
void append_features(const TaskSpec& task, int n, double p, int degree, RandomStream& rng,
                     FeatureSet& out) {
  const int d = task.d();
  const double sigma = task.sigma;
  int m = 0;
  while (m == 0) m = rng.binomial(n, p);
  Vector sum_l, sum_u;
  Matrix gram_l, gram_u;
  gaussian_block(m, d, rng, sum_l, gram_l);
  gaussian_block(n - m, d, rng, sum_u, gram_u);
  const Vector sum_all = sum_l + sum_u;
  Matrix s = static_cast<double>(n) * task.mu * task.mu.transpose();
  s.noalias() += sigma * (task.mu * sum_all.transpose() + sum_all * task.mu.transpose());
  s.noalias() += sigma * sigma * (gram_l + gram_u);
  s /= static_cast<double>(n);
  Vector v = (static_cast<double>(m) * task.mu + sigma * sum_l) / static_cast<double>(n);
  const Query query = draw_query(task, rng);
  for (int k = 0; k <= degree; ++k) {
    if (k > 0) v = s * v;
    out.psi.push_back(query.x.dot(v));
  }
  out.label.push_back(query.y);
}

FeatureSet sample_features(int d, double sigma, int n, double p, int degree, long count,
                           RandomStream& rng) {
  FeatureSet set;
  set.width = degree + 1;
  set.psi.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(set.width));
  set.label.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    const TaskSpec task = sample_task(d, sigma, rng);
    append_features(task, n, p, degree, rng, set);
  }
  return set;
}

struct Shape {
  int depth = 1;
  bool looped = false;

  int num_params() const { return looped ? 3 : 2 * depth + 1; }
};

// theta = (a_1..a_L, b_1..b_L, c), or (a, b, c) for a looped stack.
AttnStack stack_from_params(const Shape& shape, const std::vector<double>& theta, double scale) {
  if (shape.looped)
    return make_looped_stack({theta[0] / scale, theta[1] / scale}, shape.depth, theta[2]);
  std::vector<AttnLayerParams> layers(static_cast<std::size_t>(shape.depth));
  for (int l = 0; l < shape.depth; ++l)
    layers[static_cast<std::size_t>(l)] = {theta[static_cast<std::size_t>(l)] / scale,
                                           theta[static_cast<std::size_t>(shape.depth + l)] / scale};
  return make_stack(std::move(layers), theta.back());
}

std::vector<double> feature_coeffs(const Shape& shape, const std::vector<double>& theta) {
  return extract_poly_coeffs(stack_from_params(shape, theta, 1.0)).coeffs;
}

double feature_score(const std::vector<double>& q, const double* psi) {
  double f = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) f += q[k] * psi[k];
  return f;
}

double logistic_loss(const Shape& shape, const std::vector<double>& theta, const FeatureSet& set) {
  const std::vector<double> q = feature_coeffs(shape, theta);
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    total += softplus(-set.label[i] * feature_score(q, set.row(i)));
  return total / static_cast<double>(set.size());
}

double feature_accuracy(const Shape& shape, const std::vector<double>& theta,
                        const FeatureSet& set) {
  const std::vector<double> q = feature_coeffs(shape, theta);
  long correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (sign_label(feature_score(q, set.row(i))) == set.label[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> random_init(const Shape& shape, RandomStream& rng) {
  std::vector<double> theta(static_cast<std::size_t>(shape.num_params()));
  for (std::size_t i = 0; i + 1 < theta.size(); ++i) theta[i] = 2.0 * rng.uniform() - 1.0;
  theta.back() = rng.rademacher() * (0.5 + rng.uniform());
  return theta;
}

struct RestartOutcome {
  std::vector<double> theta;
  double accuracy = kNaN;
  double loss = kNaN;
  bool diverged = false;
};

RestartOutcome run_restart(const Shape& shape, int d, double sigma, int n, double p,
                           const TrainOptions& options, std::uint64_t seed,
                           const FeatureSet& heldout) {
  RandomStream rng(seed);
  const int degree = max_poly_degree(shape.depth);
  RestartOutcome out;
  std::vector<double> theta = random_init(shape, rng);
  const std::size_t dim = theta.size();
  std::vector<double> m(dim, 0.0), v(dim, 0.0), grad(dim, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= options.steps; ++step) {
    const FeatureSet batch = sample_features(d, sigma, n, p, degree, options.batch, rng);
    for (std::size_t i = 0; i < dim; ++i) {
      const double h = options.fd_step * std::max(1.0, std::abs(theta[i]));
      std::vector<double> plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      grad[i] = (logistic_loss(shape, plus, batch) - logistic_loss(shape, minus, batch)) / (2.0 * h);
    }
    if (!all_finite(grad)) {
      out.diverged = true;
      return out;
    }
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < dim; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      theta[i] -= options.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
    if (!all_finite(theta)) {
      out.diverged = true;
      return out;
    }
  }
  out.loss = logistic_loss(shape, theta, heldout);
  if (!std::isfinite(out.loss)) {
    out.diverged = true;
    return out;
  }
  out.accuracy = feature_accuracy(shape, theta, heldout);
  out.theta = std::move(theta);
  return out;
}

}  // namespace

std::string predictor_name(const Predictor& predictor) {
  return std::visit(Overloaded{
                        [](const SpiPredictor&) { return std::string("spi"); },
                        [](const SspiKPredictor&) { return std::string("sspi_k"); },
                        [](const SspiInfPredictor&) { return std::string("sspi_inf"); },
                        [](const StackPredictor&) { return std::string("attn_stack"); },
                        [](const PolyPredictor&) { return std::string("poly"); },
                    },
                    predictor);
}

double predictor_score(const Predictor& predictor, const Matrix& x, const Vector& y_obs,
                       const Vector& query, double sigma) {
  return std::visit(
      Overloaded{
          [&](const SpiPredictor&) { return query.dot(spi(x, y_obs)); },
          [&](const SspiKPredictor& s) { return query.dot(sspi_k(x, y_obs, sigma, s.k, s.alpha)); },
          [&](const SspiInfPredictor& s) {
            return query.dot(sspi_inf(x, y_obs, sigma, s.alpha).estimate);
          },
          [&](const StackPredictor& s) { return stack_forward(x, y_obs, query, s.stack); },
          [&](const PolyPredictor& s) { return poly_predict(query, x, y_obs, s.coeffs); },
      },
      predictor);
}

CurvePoint mc_accuracy(const ExperimentConfig& config) {
  check_problem(config.d, config.sigma, config.n, config.p);
  require(config.trials >= 1, ErrorCategory::invalid_argument, "trials must be at least 1");
  std::vector<char> correct(static_cast<std::size_t>(config.trials), 0);
  parallel_for(config.trials, config.threads, [&](std::int64_t t) {
    RandomStream rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    const TaskSpec task = sample_task(config.d, config.sigma, rng);
    const SemiDataset data = generate_dataset(task, config.n, config.p, rng, true);
    const Query query = draw_query(task, rng);
    const double score = predictor_score(config.predictor, data.x, data.y_obs, query.x, config.sigma);
    correct[static_cast<std::size_t>(t)] = sign_label(score) == query.y ? 1 : 0;
  });
  const long hits = std::accumulate(correct.begin(), correct.end(), 0L);
  const double trials = static_cast<double>(config.trials);
  CurvePoint point;
  point.x_value = config.n * config.p;
  point.accuracy = static_cast<double>(hits) / trials;
  point.std_err = std::sqrt(point.accuracy * (1.0 - point.accuracy) / trials);
  return point;
}

AlphaObjective::AlphaObjective(const AlphaProblem& problem, std::uint64_t seed) {
  check_problem(problem.d, problem.sigma, problem.n, problem.p);
  require(problem.trials >= 1, ErrorCategory::invalid_argument, "trials must be at least 1");
  require(!problem.k || *problem.k >= 0, ErrorCategory::invalid_argument, "k must be nonnegative");
  const auto count = static_cast<std::size_t>(problem.trials);
  s_mu_.resize(count);
  t_mu_.resize(count);
  s_s_.resize(count);
  t_t_.resize(count);
  s_t_.resize(count);
  parallel_for(problem.trials, problem.threads, [&](std::int64_t t) {
    RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const TaskSpec task = sample_task(problem.d, problem.sigma, rng);
    const SemiDataset data = generate_dataset(task, problem.n, problem.p, rng, true);
    const Vector s = spi(data);
    const Vector semi = problem.k ? sspi_k(data, problem.sigma, *problem.k, 0.0)
                                  : sspi_inf(data, problem.sigma, 0.0).estimate;
    const auto i = static_cast<std::size_t>(t);
    s_mu_[i] = s.dot(task.mu);
    t_mu_[i] = semi.dot(task.mu);
    s_s_[i] = s.squaredNorm();
    t_t_[i] = semi.squaredNorm();
    s_t_[i] = s.dot(semi);
  });
}

double AlphaObjective::operator()(double alpha) const {
  const double beta = 1.0 - alpha;
  double total = 0.0;
  for (std::size_t i = 0; i < s_mu_.size(); ++i) {
    const double norm2 = alpha * alpha * s_s_[i] + 2.0 * alpha * beta * s_t_[i] + beta * beta * t_t_[i];
    if (norm2 > 0.0) total += (alpha * s_mu_[i] + beta * t_mu_[i]) / std::sqrt(norm2);
  }
  return 1.0 - total / static_cast<double>(s_mu_.size());
}

double minimize_alpha(const AlphaObjective& objective) {
  constexpr int kGrid = 20;
  constexpr double kTie = 1e-12;
  int best = kGrid;
  double best_value = objective(1.0);
  for (int i = kGrid - 1; i >= 0; --i) {
    const double value = objective(static_cast<double>(i) / kGrid);
    if (value < best_value - kTie) {
      best = i;
      best_value = value;
    }
  }
  double lo = std::max(0, best - 1) / static_cast<double>(kGrid);
  double hi = std::min(kGrid, best + 1) / static_cast<double>(kGrid);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (hi - lo > 1e-9) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = objective(x2);
    }
  }
  double alpha = 0.5 * (lo + hi);
  double value = objective(alpha);
  const double grid_alpha = static_cast<double>(best) / kGrid;
  if (best_value < value) {
    alpha = grid_alpha;
    value = best_value;
  }
  if (objective(1.0) - value <= kTie) return 1.0;
  return std::clamp(alpha, 0.0, 1.0);
}

double optimize_alpha(int d, double sigma, int n, double p, std::optional<int> k, long trials,
                      RandomStream& rng, int threads) {
  AlphaProblem problem{d, sigma, n, p, k, trials, threads};
  const AlphaObjective objective(problem, rng.next_u64());
  return minimize_alpha(objective);
}

double TrainResult::max_accuracy() const {
  double best = kNaN;
  for (double a : restart_accuracy)
    if (std::isfinite(a) && !(a <= best)) best = a;
  return best;
}

double TrainResult::mean_accuracy() const {
  double total = 0.0;
  int count = 0;
  for (double a : restart_accuracy)
    if (std::isfinite(a)) {
      total += a;
      ++count;
    }
  return count > 0 ? total / count : kNaN;
}

TrainResult train_stack(int depth, bool looped, int d, double sigma, int n, double p,
                        const TrainOptions& options, RandomStream& rng) {
  check_problem(d, sigma, n, p);
  require(depth >= 1 && depth <= kMaxExtractDepth, ErrorCategory::invalid_argument,
          "depth must lie in [1, 6]");
  require(options.restarts >= 1, ErrorCategory::invalid_argument, "restarts must be at least 1");
  require(options.steps >= 0, ErrorCategory::invalid_argument, "steps must be nonnegative");
  require(options.batch >= 1 && options.eval_trials >= 1, ErrorCategory::invalid_argument,
          "batch and eval_trials must be at least 1");
  const Shape shape{depth, looped};
  const std::uint64_t seed = rng.next_u64();
  RandomStream heldout_rng(derive_seed(seed, std::numeric_limits<std::uint64_t>::max()));
  const FeatureSet heldout =
      sample_features(d, sigma, n, p, max_poly_degree(depth), options.eval_trials, heldout_rng);

  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(options.restarts));
  parallel_for(options.restarts, options.threads, [&](std::int64_t r) {
    outcomes[static_cast<std::size_t>(r)] =
        run_restart(shape, d, sigma, n, p, options, derive_seed(seed, static_cast<std::uint64_t>(r)),
                    heldout);
  });

  TrainResult result;
  int best = -1;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const RestartOutcome& o = outcomes[r];
    result.restart_accuracy.push_back(o.accuracy);
    result.restart_loss.push_back(o.loss);
    if (o.diverged) {
      ++result.diverged;
      continue;
    }
    if (best < 0 || o.accuracy > outcomes[static_cast<std::size_t>(best)].accuracy)
      best = static_cast<int>(r);
  }
  if (best < 0) fail(ErrorCategory::training_failed, "every training restart diverged");
  const RestartOutcome& chosen = outcomes[static_cast<std::size_t>(best)];
  result.stack = stack_from_params(shape, chosen.theta, static_cast<double>(n));
  result.heldout_accuracy = chosen.accuracy;
  return result;
}

}  // namespace ssicl
