#pragma once

#include <string>

#include "json.hpp"

#include "ssicl/looptab.hpp"
#include "ssicl/runspec.hpp"

namespace ssicl {

/// `base` with the swept parameter set to `value`; raises config errors for
/// values outside the parameter's domain.
ExperimentConfig apply_sweep(const ExperimentConfig& base, const std::string& param, double value);

/// Column label of a predictor in curve output, e.g. "sspi_k1@opt".
std::string predictor_label(const PredictorSpec& spec);

/// Rows: sweep_value, predictor, accuracy, std_err, analytic_reference.
std::string run_curve(const RunSpec& spec);
/// Rows: sweep_value, k, alpha_star, loss_at_alpha_star, loss_at_one.
std::string run_alpha_sweep(const RunSpec& spec);
nlohmann::json run_train(const RunSpec& spec);
nlohmann::json run_looptab(const RunSpec& spec);
/// One record per point of the n x np x sigma x d grid.
nlohmann::json run_theory_table(const RunSpec& spec);

BasePredictor make_base(const PredictorSpec& spec, double sigma);

/// Runs the command and writes its output to spec.output_path.
void execute(const RunSpec& spec);

/// Writes `content` to `path`, raising an I/O error on failure.
void write_text(const std::string& path, const std::string& content);

}  // namespace ssicl
