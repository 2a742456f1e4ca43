#include "ssicl/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ssicl/csv.hpp"
#include "ssicl/error.hpp"
#include "ssicl/parallel.hpp"
#include "ssicl/theory.hpp"

namespace ssicl {
namespace {

using json = nlohmann::json;

// Stream tags for seeds derived from one sweep point's seed.
constexpr std::uint64_t kAlphaStream = 1ULL << 32;
constexpr std::uint64_t kAnalyticStream = 1ULL << 33;
constexpr std::uint64_t kTrainStream = 1ULL << 34;
constexpr std::uint64_t kEvalStream = 1ULL << 35;

int as_count(double value, const std::string& param) {
  if (value != std::floor(value) || value < 1.0 || value > 1e9)
    fail(ErrorCategory::config, "sweep value for '" + param + "' must be a positive integer");
  return static_cast<int>(value);
}

double checked_p(double p, const std::string& param) {
  if (!(p > 0.0 && p <= 1.0))
    fail(ErrorCategory::config, "sweep value for '" + param + "' gives p outside (0, 1]");
  return p;
}

std::optional<int> predictor_k(const Predictor& p) {
  if (const auto* s = std::get_if<SspiKPredictor>(&p)) return s->k;
  return std::nullopt;
}

bool is_sspi(const Predictor& p) {
  return std::holds_alternative<SspiKPredictor>(p) || std::holds_alternative<SspiInfPredictor>(p);
}

void set_alpha(Predictor& p, double alpha) {
  if (auto* s = std::get_if<SspiKPredictor>(&p)) s->alpha = alpha;
  if (auto* s = std::get_if<SspiInfPredictor>(&p)) s->alpha = alpha;
}

double spi_reference(const ExperimentConfig& c, long inner, std::uint64_t seed) {
  RandomStream rng(seed);
  return 1.0 - spi_error(c.n, c.p, c.sigma, c.d, inner, rng, LabelCount::binomial, c.threads).value;
}

void require_sweep(const RunSpec& spec) {
  if (spec.sweep.values.empty()) fail(ErrorCategory::config, "'sweep.values': must be nonempty");
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ExperimentConfig apply_sweep(const ExperimentConfig& base, const std::string& param, double value) {
  ExperimentConfig c = base;
  if (param == "np") {
    c.p = checked_p(value / c.n, param);
  } else if (param == "n") {
    const double np = base.n * base.p;
    c.n = as_count(value, param);
    c.p = checked_p(np / c.n, param);
  } else if (param == "p") {
    c.p = checked_p(value, param);
  } else if (param == "sigma") {
    if (!(value >= 0.0)) fail(ErrorCategory::config, "sweep value for 'sigma' must be nonnegative");
    c.sigma = value;
  } else if (param == "d") {
    c.d = as_count(value, param);
  } else {
    fail(ErrorCategory::config, "'sweep.param': unknown parameter '" + param + "'");
  }
  return c;
}

std::string predictor_label(const PredictorSpec& spec) {
  const auto alpha = [&](double a) { return spec.optimal_alpha ? std::string("@opt") : "@" + format_double(a); };
  return std::visit(
      [&](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SpiPredictor>) return "spi";
        else if constexpr (std::is_same_v<T, SspiKPredictor>) return "sspi_k" + std::to_string(p.k) + alpha(p.alpha);
        else if constexpr (std::is_same_v<T, SspiInfPredictor>) return "sspi_inf" + alpha(p.alpha);
        else if constexpr (std::is_same_v<T, StackPredictor>)
          return (p.stack.looped ? "looped_L" : "attn_stack_L") + std::to_string(p.stack.depth());
        else return "poly_deg" + std::to_string(p.coeffs.degree());
      },
      spec.predictor);
}

std::string run_curve(const RunSpec& spec) {
  require_sweep(spec);
  std::string out = csv_line({"sweep_value", "predictor", "accuracy", "std_err", "analytic_reference"});
  for (std::size_t i = 0; i < spec.sweep.values.size(); ++i) {
    const double value = spec.sweep.values[i];
    ExperimentConfig point = apply_sweep(spec.base, spec.sweep.param, value);
    point.seed = derive_seed(spec.base.seed, i);  // shared by all predictors at this point
    std::optional<double> spi_ref;
    for (std::size_t j = 0; j < spec.predictors.size(); ++j) {
      const PredictorSpec& ps = spec.predictors[j];
      ExperimentConfig c = point;
      c.predictor = ps.predictor;
      if (ps.optimal_alpha) {
        RandomStream rng(derive_seed(point.seed, kAlphaStream + j));
        set_alpha(c.predictor, optimize_alpha(c.d, c.sigma, c.n, c.p, predictor_k(c.predictor),
                                              spec.alpha.trials, rng, c.threads));
      }
      const CurvePoint cp = mc_accuracy(c);
      std::string reference;
      if (std::holds_alternative<SpiPredictor>(c.predictor)) {
        if (!spi_ref) spi_ref = spi_reference(c, spec.analytic_trials, derive_seed(point.seed, kAnalyticStream));
        reference = format_double(*spi_ref);
      } else if (is_sspi(c.predictor)) {
        reference = format_double(1.0 - oracle_error(c.n * c.p, c.sigma));
      }
      out += csv_line({format_double(value), predictor_label(ps), format_double(cp.accuracy),
                       format_double(cp.std_err), reference});
    }
  }
  return out;
}

std::string run_alpha_sweep(const RunSpec& spec) {
  require_sweep(spec);
  std::string out = csv_line({"sweep_value", "k", "alpha_star", "loss_at_alpha_star", "loss_at_one"});
  for (std::size_t i = 0; i < spec.sweep.values.size(); ++i) {
    const double value = spec.sweep.values[i];
    const ExperimentConfig c = apply_sweep(spec.base, spec.sweep.param, value);
    for (std::size_t j = 0; j < spec.alpha.ks.size(); ++j) {
      const std::optional<int> k = spec.alpha.ks[j];
      const AlphaProblem problem{c.d, c.sigma, c.n, c.p, k, spec.alpha.trials, c.threads};
      const AlphaObjective objective(problem, derive_seed(derive_seed(spec.base.seed, i), j));
      const double alpha = minimize_alpha(objective);
      out += csv_line({format_double(value), k ? std::to_string(*k) : "inf", format_double(alpha),
                       format_double(objective(alpha)), format_double(objective(1.0))});
    }
  }
  return out;
}

json run_train(const RunSpec& spec) {
  const ExperimentConfig& b = spec.base;
  TrainOptions options = spec.train.options;
  options.threads = b.threads;
  json results = json::array();
  for (int depth : spec.train.depths) {
    RandomStream rng(derive_seed(b.seed, kTrainStream + static_cast<std::uint64_t>(depth)));
    const TrainResult trained = train_stack(depth, spec.train.looped, b.d, b.sigma, b.n, b.p, options, rng);
    ExperimentConfig eval = b;
    eval.seed = derive_seed(b.seed, kEvalStream);
    eval.predictor = StackPredictor{trained.stack};
    const CurvePoint cp = mc_accuracy(eval);
    json restarts = json::array();
    for (double a : trained.restart_accuracy) restarts.push_back(nullable(a));
    results.push_back({{"depth", depth},
                       {"looped", spec.train.looped},
                       {"stack", predictor_to_json({eval.predictor, false})},
                       {"heldout_accuracy", trained.heldout_accuracy},
                       {"heldout_accuracy_max", nullable(trained.max_accuracy())},
                       {"heldout_accuracy_mean", nullable(trained.mean_accuracy())},
                       {"restart_heldout_accuracy", restarts},
                       {"diverged_restarts", trained.diverged},
                       {"mc_accuracy", cp.accuracy},
                       {"mc_std_err", cp.std_err}});
  }
  const double ref = spi_reference(b, spec.analytic_trials, derive_seed(b.seed, kAnalyticStream));
  return {{"n", b.n}, {"p", b.p}, {"sigma", b.sigma}, {"d", b.d}, {"trials", b.trials},
          {"spi_reference_accuracy", ref}, {"results", results}};
}

BasePredictor make_base(const PredictorSpec& spec, double sigma) {
  return std::visit(
      [&](const auto& p) -> BasePredictor {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SpiPredictor>) {
          return spi_base();
        } else if constexpr (std::is_same_v<T, SspiInfPredictor>) {
          return sspi_inf_base(p.alpha);
        } else if constexpr (std::is_same_v<T, StackPredictor>) {
          return stack_base(p.stack);
        } else {
          const Predictor pred = p;
          return [pred, sigma](const Matrix& cx, const Vector& cy, const Matrix& q) -> Vector {
            Vector out(q.rows());
            for (Eigen::Index i = 0; i < q.rows(); ++i)
              out[i] = predictor_score(pred, cx, cy, q.row(i).transpose(), sigma);
            return out;
          };
        }
      },
      spec.predictor);
}

json run_looptab(const RunSpec& spec) {
  const LoopTabSpec& l = spec.looptab;
  const BasePredictor base = make_base(l.base, spec.base.sigma);
  const LoopOptions options{l.standardize};
  json report = {{"source", l.source}, {"iterations", l.iterations},
                 {"base", predictor_to_json(l.base)}};
  if (l.source == "csv") {
    const TabularSplit split = load_csv(l.path, l.label_column, l.missing_token, l.test_fraction,
                                        spec.base.seed);
    const LoopResult r = loop_tab_fm(split, l.iterations, base, options);
    json per = json::array();
    for (const auto& it : r.per_iteration)
      per.push_back({{"val_risk", it.val_risk}, {"test_accuracy", nullable(it.test_accuracy)}});
    report["rows"] = {{"labeled", split.labeled_x.rows()},
                      {"unlabeled", split.unlabeled_x.rows()},
                      {"test", split.test_x.rows()}};
    report["per_iteration"] = per;
    report["best_iteration"] = r.best_iteration;
    report["best_val_risk"] = r.best_val_risk;
    report["best_test_accuracy"] = nullable(r.best_test_accuracy);
    return report;
  }

  std::vector<LoopResult> runs(static_cast<std::size_t>(l.seeds));
  parallel_for(l.seeds, spec.base.threads, [&](std::int64_t s) {
    RandomStream rng(derive_seed(spec.base.seed, static_cast<std::uint64_t>(s)));
    const TabularSplit split =
        synthetic_gmm_split(spec.base.d, spec.base.sigma, l.labeled, l.unlabeled, l.test, rng);
    runs[static_cast<std::size_t>(s)] = loop_tab_fm(split, l.iterations, base, options);
  });
  const auto width = static_cast<std::size_t>(l.iterations) + 1;
  std::vector<double> acc(width, 0.0), risk(width, 0.0);
  std::vector<int> best_counts(width, 0);
  double best_acc = 0.0;
  for (const LoopResult& r : runs) {
    for (std::size_t k = 0; k < width; ++k) {
      acc[k] += r.per_iteration[k].test_accuracy;
      risk[k] += r.per_iteration[k].val_risk;
    }
    ++best_counts[static_cast<std::size_t>(r.best_iteration)];
    best_acc += r.best_test_accuracy;
  }
  for (std::size_t k = 0; k < width; ++k) {
    acc[k] /= static_cast<double>(runs.size());
    risk[k] /= static_cast<double>(runs.size());
  }
  report["d"] = spec.base.d;
  report["sigma"] = spec.base.sigma;
  report["runs"] = l.seeds;
  report["rows"] = {{"labeled", l.labeled}, {"unlabeled", l.unlabeled}, {"test", l.test}};
  report["mean_test_accuracy"] = acc;
  report["mean_val_risk"] = risk;
  report["best_iteration_counts"] = best_counts;
  report["mean_best_test_accuracy"] = best_acc / static_cast<double>(runs.size());
  return report;
}

json run_theory_table(const RunSpec& spec) {
  const ExperimentConfig& b = spec.base;
  const std::vector<double> ns = spec.theory.n.value_or(std::vector<double>{static_cast<double>(b.n)});
  const std::vector<double> nps = spec.theory.np.value_or(std::vector<double>{b.n * b.p});
  const std::vector<double> sigmas = spec.theory.sigma.value_or(std::vector<double>{b.sigma});
  const std::vector<double> ds = spec.theory.d.value_or(std::vector<double>{static_cast<double>(b.d)});
  json records = json::array();
  std::uint64_t index = 0;
  for (double n_value : ns)
    for (double np : nps)
      for (double sigma : sigmas)
        for (double d_value : ds) {
          const int n = as_count(n_value, "theory.grid.n");
          const int d = as_count(d_value, "theory.grid.d");
          const double p = checked_p(np / n, "theory.grid.np");
          if (!(sigma >= 0.0)) fail(ErrorCategory::config, "'theory.grid.sigma': must be nonnegative");
          RandomStream rng(derive_seed(b.seed, index++));
          const ErrorEstimate err =
              spi_error(n, p, sigma, d, spec.analytic_trials, rng, LabelCount::binomial, b.threads);
          const double upper = spi_error_upper(n, p, sigma, d);
          json flag = nullptr;
          if (np >= 8.0 * d * sigma * sigma) flag = upper >= err.value;
          records.push_back({{"inputs", {{"n", n}, {"np", np}, {"p", p}, {"sigma", sigma}, {"d", d}}},
                             {"spi_error", {{"value", err.value}, {"std_err", err.std_err}}},
                             {"spi_error_upper", upper},
                             {"oracle_error", oracle_error(np, sigma)},
                             {"w_star", w_star_scalar(n, p, sigma, d)},
                             {"upper_ge_spi_error", flag}});
        }
  return records;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot open output " + path);
  out << content;
  out.flush();
  if (!out) fail(ErrorCategory::io, "write failed for " + path);
}

void execute(const RunSpec& spec) {
  if (spec.output_path.empty()) fail(ErrorCategory::config, "'output': no output path given");
  // Fail before any computation when the output directory is missing.
  const auto parent = std::filesystem::path(spec.output_path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    fail(ErrorCategory::io, "output directory does not exist: " + parent.string());
  switch (spec.command) {
    case Command::curve: write_text(spec.output_path, run_curve(spec)); break;
    case Command::alpha_sweep: write_text(spec.output_path, run_alpha_sweep(spec)); break;
    case Command::train: write_text(spec.output_path, run_train(spec).dump(2) + "\n"); break;
    case Command::looptab: write_text(spec.output_path, run_looptab(spec).dump(2) + "\n"); break;
    case Command::theory_table: write_text(spec.output_path, run_theory_table(spec).dump(2) + "\n"); break;
  }
}

}  // namespace ssicl
