#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssicl/attention.hpp"
#include "ssicl/rng.hpp"
#include "ssicl/types.hpp"

namespace ssicl {

/// Labeled rows carry labels in {-1, +1}; unlabeled rows carry soft labels
/// in [-1, 1] once assigned (empty until then). Rows are matrix rows.
struct TabularSplit {
  std::vector<std::string> feature_names;
  Matrix labeled_x;
  Vector labeled_y;
  Matrix unlabeled_x;
  Vector unlabeled_soft;
  Matrix test_x;
  Vector test_y;

  int d() const { return static_cast<int>(labeled_x.cols()); }
};

/// In-context base model: soft scores for `query_x` rows given context rows
/// and their (possibly soft) labels.
using BasePredictor =
    std::function<Vector(const Matrix& context_x, const Vector& context_y, const Matrix& query_x)>;

BasePredictor spi_base();
BasePredictor sspi_inf_base(double alpha);
BasePredictor stack_base(AttnStack stack);

/// Mean of min(|s - 1|, |s + 1|).
double val_risk(const Vector& soft_labels);

struct LoopIteration {
  double val_risk = 0.0;
  double test_accuracy = 0.0;  // of the loop-k model; NaN without test rows
};

struct LoopResult {
  std::vector<LoopIteration> per_iteration;  // index k is Loop-k
  int best_iteration = 0;
  double best_val_risk = 0.0;
  double best_test_accuracy = 0.0;
  std::vector<double> best_test_trace;  // test accuracy of the retained model after each k
  Vector final_soft_labels;
};

struct LoopOptions {
  // Z-score features with labeled + unlabeled statistics before any base call.
  bool standardize = true;
};

/// Loop-0 fits on labeled rows and soft-labels the unlabeled rows; loop k
/// refits on labeled rows plus the current soft labels and relabels. The
/// retained model changes only when the validation risk strictly drops.
LoopResult loop_tab_fm(const TabularSplit& split, int iterations, const BasePredictor& base,
                       const LoopOptions& options = {});

/// Label cells equal to `missing_token` mark unlabeled rows; otherwise the
/// cell must parse to -1 or +1. A `test_fraction` of the labeled rows is
/// held out by a seeded shuffle.
TabularSplit load_csv(const std::string& path, const std::string& label_column,
                      const std::string& missing_token = "", double test_fraction = 0.0,
                      std::uint64_t seed = 0);

/// Writes labeled then unlabeled rows (features, then the label column).
/// Soft labels and the test rows are not written.
void write_csv(const TabularSplit& split, const std::string& path, const std::string& label_column,
               const std::string& missing_token = "");

/// Two-class GMM split: labels uniform, x = y mu + sigma g with mu uniform on
/// the unit sphere.
TabularSplit synthetic_gmm_split(int d, double sigma, int labeled, int unlabeled, int test,
                                 RandomStream& rng);

}  // namespace ssicl
