#include "ssicl/looptab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "ssicl/csv.hpp"
#include "ssicl/error.hpp"
#include "ssicl/estimators.hpp"
#include "ssicl/gmm.hpp"

namespace ssicl {
namespace {

Vector clip_unit(Vector v) { return v.cwiseMax(-1.0).cwiseMin(1.0); }

double accuracy(const Vector& scores, const Vector& labels) {
  if (labels.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  long correct = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (sign_label(scores[i]) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Vector stack_rows(const Vector& top, const Vector& bottom) {
  Vector out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

void standardize(TabularSplit& split) {
  const Matrix pool = stack_rows(split.labeled_x, split.unlabeled_x);
  const double count = static_cast<double>(pool.rows());
  const Eigen::RowVectorXd mean = pool.colwise().mean();
  Eigen::RowVectorXd scale = ((pool.rowwise() - mean).colwise().squaredNorm() / count).cwiseSqrt();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale[j] > 0.0)) scale[j] = 1.0;  // constant column: center only
  auto apply = [&](Matrix& m) {
    if (m.rows() == 0) return;
    m = (m.rowwise() - mean).array().rowwise() / scale.array();
  };
  apply(split.labeled_x);
  apply(split.unlabeled_x);
  apply(split.test_x);
}

void check_split(const TabularSplit& split) {
  const auto d = split.labeled_x.cols();
  if (split.labeled_x.rows() == 0) fail(ErrorCategory::invalid_split, "labeled split is empty");
  if (split.labeled_y.size() != split.labeled_x.rows() || split.test_y.size() != split.test_x.rows())
    fail(ErrorCategory::invalid_split, "label count differs from row count");
  if ((split.unlabeled_x.rows() > 0 && split.unlabeled_x.cols() != d) ||
      (split.test_x.rows() > 0 && split.test_x.cols() != d))
    fail(ErrorCategory::invalid_split, "feature dimensions differ across splits");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < split.labeled_y.size(); ++i) {
    const double y = split.labeled_y[i];
    if (y == 1.0) pos = true;
    else if (y == -1.0) neg = true;
    else fail(ErrorCategory::invalid_split, "labeled split holds a label outside {-1, +1}");
  }
  if (!(pos && neg)) fail(ErrorCategory::invalid_split, "labeled split has a single class");
}

Vector query_scores(const BasePredictor& base, const Matrix& cx, const Vector& cy, const Matrix& q) {
  if (q.rows() == 0) return Vector();
  Vector scores = base(cx, cy, q);
  if (scores.size() != q.rows()) fail(ErrorCategory::invalid_argument, "base predictor returned wrong size");
  return scores;
}

}  // namespace

BasePredictor spi_base() {
  return [](const Matrix& cx, const Vector& cy, const Matrix& q) -> Vector { return q * spi(cx, cy); };
}

BasePredictor sspi_inf_base(double alpha) {
  // The eigenvector of X^T X / n - sigma^2 I does not depend on sigma.
  return [alpha](const Matrix& cx, const Vector& cy, const Matrix& q) -> Vector {
    return q * sspi_inf(cx, cy, 0.0, alpha).estimate;
  };
}

BasePredictor stack_base(AttnStack stack) {
  return [stack = std::move(stack)](const Matrix& cx, const Vector& cy, const Matrix& q) -> Vector {
    Vector out(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      out[i] = stack_forward(cx, cy, q.row(i).transpose(), stack);
    return out;
  };
}

double val_risk(const Vector& soft_labels) {
  if (soft_labels.size() == 0) fail(ErrorCategory::undefined_risk, "validation risk of an empty set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < soft_labels.size(); ++i)
    total += std::min(std::abs(soft_labels[i] - 1.0), std::abs(soft_labels[i] + 1.0));
  return total / static_cast<double>(soft_labels.size());
}

LoopResult loop_tab_fm(const TabularSplit& input, int iterations, const BasePredictor& base,
                       const LoopOptions& options) {
  require(iterations >= 0, ErrorCategory::invalid_argument, "iterations must be nonnegative");
  check_split(input);
  TabularSplit split = input;
  if (options.standardize) standardize(split);
  const bool has_unlabeled = split.unlabeled_x.rows() > 0;

  LoopResult result;
  Vector soft = clip_unit(query_scores(base, split.labeled_x, split.labeled_y, split.unlabeled_x));
  LoopIteration first;
  first.val_risk = has_unlabeled ? val_risk(soft) : 0.0;
  first.test_accuracy =
      accuracy(query_scores(base, split.labeled_x, split.labeled_y, split.test_x), split.test_y);
  result.per_iteration.push_back(first);
  result.best_val_risk = first.val_risk;
  result.best_test_accuracy = first.test_accuracy;
  result.best_test_trace.push_back(first.test_accuracy);

  const Matrix context_x = stack_rows(split.labeled_x, split.unlabeled_x);
  for (int k = 1; k <= iterations; ++k) {
    const Vector context_y = stack_rows(split.labeled_y, soft);
    soft = clip_unit(query_scores(base, context_x, context_y, split.unlabeled_x));
    LoopIteration it;
    it.val_risk = has_unlabeled ? val_risk(soft) : 0.0;
    it.test_accuracy = accuracy(query_scores(base, context_x, context_y, split.test_x), split.test_y);
    result.per_iteration.push_back(it);
    if (it.val_risk < result.best_val_risk) {
      result.best_iteration = k;
      result.best_val_risk = it.val_risk;
      result.best_test_accuracy = it.test_accuracy;
    }
    result.best_test_trace.push_back(result.best_test_accuracy);
  }
  result.final_soft_labels = soft;
  return result;
}

TabularSplit load_csv(const std::string& path, const std::string& label_column,
                      const std::string& missing_token, double test_fraction, std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorCategory::config,
          "test_fraction must lie in [0, 1)");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path);
  const std::vector<CsvRow> records = read_csv_records(in);
  if (records.empty()) fail(ErrorCategory::parse, "missing header row in " + path);

  const CsvRow& header = records.front();
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) fail(ErrorCategory::schema, "label column '" + label_column + "' not found");
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  if (records.size() == 1) fail(ErrorCategory::empty_split, "no data rows in " + path);

  TabularSplit split;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_col) split.feature_names.push_back(header[j]);
  const auto d = static_cast<Eigen::Index>(split.feature_names.size());

  std::vector<Vector> lab_rows, unlab_rows;
  std::vector<double> lab_y;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const CsvRow& rec = records[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (rec.size() != header.size())
      fail(ErrorCategory::parse, where + ": expected " + std::to_string(header.size()) +
                                     " fields, found " + std::to_string(rec.size()));
    Vector features(d);
    Eigen::Index f = 0;
    for (std::size_t j = 0; j < rec.size(); ++j) {
      if (j == label_col) continue;
      double value = 0.0;
      if (!parse_double(rec[j], value))
        fail(ErrorCategory::parse, where + ", column " + std::to_string(j + 1) + " ('" + header[j] +
                                       "'): non-numeric value '" + rec[j] + "'");
      features[f++] = value;
    }
    const std::string& cell = rec[label_col];
    if (cell == missing_token) {
      unlab_rows.push_back(std::move(features));
      continue;
    }
    double label = 0.0;
    if (!parse_double(cell, label) || (label != 1.0 && label != -1.0))
      fail(ErrorCategory::schema, where + ": label '" + cell + "' is not -1, +1 or the missing token");
    lab_rows.push_back(std::move(features));
    lab_y.push_back(label);
  }

  std::vector<std::size_t> order(lab_rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(order.size())));
  if (n_test > 0) {
    std::mt19937_64 engine(seed);
    std::shuffle(order.begin(), order.end(), engine);
  }
  const std::size_t n_lab = order.size() - n_test;
  split.labeled_x.resize(static_cast<Eigen::Index>(n_lab), d);
  split.labeled_y.resize(static_cast<Eigen::Index>(n_lab));
  split.test_x.resize(static_cast<Eigen::Index>(n_test), d);
  split.test_y.resize(static_cast<Eigen::Index>(n_test));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t src = order[i];
    if (i < n_lab) {
      split.labeled_x.row(static_cast<Eigen::Index>(i)) = lab_rows[src].transpose();
      split.labeled_y[static_cast<Eigen::Index>(i)] = lab_y[src];
    } else {
      const auto t = static_cast<Eigen::Index>(i - n_lab);
      split.test_x.row(t) = lab_rows[src].transpose();
      split.test_y[t] = lab_y[src];
    }
  }
  split.unlabeled_x.resize(static_cast<Eigen::Index>(unlab_rows.size()), d);
  for (std::size_t i = 0; i < unlab_rows.size(); ++i)
    split.unlabeled_x.row(static_cast<Eigen::Index>(i)) = unlab_rows[i].transpose();
  return split;
}

void write_csv(const TabularSplit& split, const std::string& path, const std::string& label_column,
               const std::string& missing_token) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write " + path);
  CsvRow header = split.feature_names;
  if (header.empty())
    for (int j = 0; j < split.d(); ++j) header.push_back("x" + std::to_string(j));
  header.push_back(label_column);
  out << csv_line(header);
  auto emit = [&](const Matrix& x, const std::string* label, const Vector* labels) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      CsvRow row;
      for (Eigen::Index j = 0; j < x.cols(); ++j) row.push_back(format_double(x(i, j)));
      row.push_back(labels ? ((*labels)[i] > 0 ? "1" : "-1") : *label);
      out << csv_line(row);
    }
  };
  emit(split.labeled_x, nullptr, &split.labeled_y);
  emit(split.unlabeled_x, &missing_token, nullptr);
  if (!out) fail(ErrorCategory::io, "write failed for " + path);
}

TabularSplit synthetic_gmm_split(int d, double sigma, int labeled, int unlabeled, int test,
                                 RandomStream& rng) {
  require(labeled >= 2 && unlabeled >= 0 && test >= 0, ErrorCategory::invalid_argument,
          "need at least two labeled rows and nonnegative split sizes");
  const TaskSpec task = sample_task(d, sigma, rng);
  TabularSplit split;
  for (int j = 0; j < d; ++j) split.feature_names.push_back("x" + std::to_string(j));
  auto draw = [&](int rows, Matrix& x, Vector& y) {
    const SemiDataset data = generate_dataset(task, rows, 1.0, rng);
    x = data.x;
    y = data.y_true;
  };
  // Both classes must appear among the labeled rows.
  do {
    draw(labeled, split.labeled_x, split.labeled_y);
  } while (split.labeled_y.maxCoeff() == split.labeled_y.minCoeff());
  Vector unused;
  if (unlabeled > 0) draw(unlabeled, split.unlabeled_x, unused);
  else split.unlabeled_x.resize(0, d);
  if (test > 0) draw(test, split.test_x, split.test_y);
  else {
    split.test_x.resize(0, d);
    split.test_y.resize(0);
  }
  return split;
}

}  // namespace ssicl
