#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssicl/experiments.hpp"

namespace ssicl {

enum class Command { curve, alpha_sweep, train, looptab, theory_table };

std::string to_string(Command command);
Command parse_command(const std::string& text);

/// Swept parameter: np (p = v / n), n (n p held fixed), p, sigma or d.
struct SweepSpec {
  std::string param = "np";
  std::vector<double> values;
};

/// A predictor entry; sspi predictors may request the optimized alpha.
struct PredictorSpec {
  Predictor predictor = SpiPredictor{};
  bool optimal_alpha = false;
};

struct AlphaSpec {
  long trials = 2000;
  std::vector<std::optional<int>> ks{std::nullopt};  // nullopt is k = infinity
};

struct TrainSpec {
  std::vector<int> depths{1, 2};
  bool looped = false;
  TrainOptions options;
};

struct LoopTabSpec {
  std::string source = "synthetic";  // or "csv"
  std::string path;
  std::string label_column = "label";
  std::string missing_token;
  double test_fraction = 0.0;
  int iterations = 5;
  PredictorSpec base{SspiInfPredictor{0.5}, false};
  bool standardize = true;
  int seeds = 100;
  int labeled = 10;
  int unlabeled = 10;
  int test = 1000;
};

/// Grid axes; an absent axis takes the base value.
struct TheorySpec {
  std::optional<std::vector<double>> n, np, sigma, d;
};

struct RunSpec {
  Command command = Command::curve;
  ExperimentConfig base;
  SweepSpec sweep;
  std::vector<PredictorSpec> predictors{PredictorSpec{}};
  long analytic_trials = 100000;  // inner draws for the one-layer error reference
  AlphaSpec alpha;
  TrainSpec train;
  LoopTabSpec looptab;
  TheorySpec theory;
  std::string output_path;
};

/// Throws config errors naming the offending key.
RunSpec parse_run_spec(const nlohmann::json& doc);
nlohmann::json to_json(const RunSpec& spec);

RunSpec load_run_spec(const std::string& path);

nlohmann::json predictor_to_json(const PredictorSpec& spec);
PredictorSpec predictor_from_json(const nlohmann::json& doc);

}  // namespace ssicl
