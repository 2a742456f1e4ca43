#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssicl/attention.hpp"
#include "ssicl/estimators.hpp"
#include "ssicl/rng.hpp"
#include "ssicl/types.hpp"

namespace ssicl {

struct SpiPredictor {};
struct SspiKPredictor {
  int k = 1;
  double alpha = 0.5;
};
struct SspiInfPredictor {
  double alpha = 0.5;
};
struct StackPredictor {
  AttnStack stack;
};
struct PolyPredictor {
  PolyCoeffs coeffs;
};

using Predictor =
    std::variant<SpiPredictor, SspiKPredictor, SspiInfPredictor, StackPredictor, PolyPredictor>;

/// Short name: spi, sspi_k, sspi_inf, attn_stack or poly.
std::string predictor_name(const Predictor& predictor);

/// Raw score of `predictor` for `query` given demonstrations (x, y_obs);
/// the predicted label is sign_label(score). `sigma` is the known noise level.
double predictor_score(const Predictor& predictor, const Matrix& x, const Vector& y_obs,
                       const Vector& query, double sigma);

struct ExperimentConfig {
  int d = 10;
  double sigma = 1.0;
  int n = 50;
  double p = 0.2;
  long trials = 10000;
  std::uint64_t seed = 0;
  Predictor predictor = SpiPredictor{};
  int threads = 1;
};

struct CurvePoint {
  double x_value = 0.0;  // n p unless the caller overrides it
  double accuracy = 0.0;
  double std_err = 0.0;
};

/// Empirical accuracy over `trials` independent (task, dataset, query) draws
/// with at least one revealed label. Trial t uses derive_seed(seed, t).
CurvePoint mc_accuracy(const ExperimentConfig& config);

/// Settings of the alpha objective 1 - E[cos(mu_ss, mu)].
struct AlphaProblem {
  int d = 10;
  double sigma = 1.0;
  int n = 50;
  double p = 0.2;
  std::optional<int> k;  // nullopt selects the top-eigenvector variant
  long trials = 2000;
  int threads = 1;
};

/// The alpha objective on a fixed set of draws (common random numbers), so
/// evaluations at different alpha are directly comparable.
class AlphaObjective {
 public:
  AlphaObjective(const AlphaProblem& problem, std::uint64_t seed);

  double operator()(double alpha) const;

 private:
  // Per trial: s.mu, t.mu, |s|^2, |t|^2, s.t where s = mu_s and t is the
  // semi-supervised direction.
  std::vector<double> s_mu_, t_mu_, s_s_, t_t_, s_t_;
};

/// Argmin of the objective on [0, 1]: a coarse grid followed by golden-section
/// refinement. Near-ties (within 1e-12) resolve toward alpha = 1.
double minimize_alpha(const AlphaObjective& objective);

double optimize_alpha(int d, double sigma, int n, double p, std::optional<int> k, long trials,
                      RandomStream& rng, int threads = 1);

struct TrainOptions {
  int restarts = 10;
  int steps = 10000;
  int batch = 512;
  double learning_rate = 1e-2;
  double fd_step = 1e-4;
  long eval_trials = 4096;
  int threads = 1;
};

struct TrainResult {
  AttnStack stack;                        // best restart by held-out accuracy
  double heldout_accuracy = 0.0;          // of the returned stack
  std::vector<double> restart_accuracy;   // NaN for diverged restarts
  std::vector<double> restart_loss;       // final held-out logistic loss
  int diverged = 0;

  double max_accuracy() const;
  double mean_accuracy() const;
};

/// Fits the gains of an L-layer stack (or one looped layer) by central
/// finite-difference gradients and Adam on the logistic loss over fresh
/// minibatches of prompts. Restart r draws from derive_seed(seed, r).
TrainResult train_stack(int depth, bool looped, int d, double sigma, int n, double p,
                        const TrainOptions& options, RandomStream& rng);

}  // namespace ssicl
