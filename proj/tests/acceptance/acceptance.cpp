// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//   acceptance --cli PATH --workdir DIR [--only N ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ssicl/attention.hpp"
#include "ssicl/estimators.hpp"
#include "ssicl/experiments.hpp"
#include "ssicl/looptab.hpp"
#include "ssicl/runner.hpp"
#include "ssicl/runspec.hpp"
#include "ssicl/theory.hpp"

using namespace ssicl;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double joint(double a, double b) { return std::sqrt(a * a + b * b); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1. Monte-Carlo accuracy of the supervised estimator against the closed form.
Outcome criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  Outcome out{true, ""};
  std::uint64_t stream = 0;
  for (double np : {5.0, 10.0, 20.0, 50.0}) {
    ExperimentConfig c;
    c.d = 10;
    c.sigma = 1.0;
    c.n = 50;
    c.p = np / 50.0;
    c.trials = 100000;
    c.seed = derive_seed(101, stream++);
    const CurvePoint mc = mc_accuracy(c);
    RandomStream rng(derive_seed(102, stream++));
    const ErrorEstimate th = spi_error(c.n, c.p, c.sigma, c.d, 1000000, rng);
    const double z = std::abs(mc.accuracy - (1.0 - th.value)) / joint(mc.std_err, th.std_err);
    out.pass = out.pass && z < 3.0;
    out.detail += "np=" + fmt(np, 0) + " mc=" + fmt(mc.accuracy) + " theory=" + fmt(1.0 - th.value) +
                  " z=" + fmt(z, 2) + "; ";
  }
  const double elapsed = seconds_since(start);
  out.pass = out.pass && elapsed < 120.0;
  out.detail += "runtime " + fmt(elapsed, 1) + "s (target < 120s)";
  return out;
}

// 2. Newton minimization of the quadratic population loss with finite-difference
// derivatives; central differences are exact for a quadratic up to rounding.
Outcome criterion_2() {
  const int d = 5, n = 50;
  const double p = 0.2, sigma = 1.0;
  const int dim = d * d;
  auto loss = [&](const Vector& w) {
    return reduced_loss(Eigen::Map<const Matrix>(w.data(), d, d), n, p, sigma, d);
  };
  RandomStream rng(202);
  Vector w(dim);
  for (int i = 0; i < dim; ++i) w[i] = 0.05 * rng.normal();
  const double h = 1e-3;
  for (int iter = 0; iter < 3; ++iter) {
    Vector grad(dim);
    Matrix hess(dim, dim);
    for (int i = 0; i < dim; ++i) {
      Vector e = Vector::Zero(dim);
      e[i] = h;
      grad[i] = (loss(w + e) - loss(w - e)) / (2 * h);
      for (int j = 0; j <= i; ++j) {
        Vector f = Vector::Zero(dim);
        f[j] = h;
        const double v = (loss(w + e + f) - loss(w + e - f) - loss(w - e + f) + loss(w - e - f)) / (4 * h * h);
        hess(i, j) = v;
        hess(j, i) = v;
      }
    }
    w -= hess.ldlt().solve(grad);
  }
  const Matrix wm = Eigen::Map<const Matrix>(w.data(), d, d);
  const double total = wm.norm();
  const double off = (wm - Matrix(wm.diagonal().asDiagonal())).norm();
  const double c = wm.diagonal().mean();
  const double target = w_star_scalar(n, p, sigma, d);
  const double off_ratio = off / total;
  const double rel = std::abs(c - target) / target;
  return {off_ratio < 1e-3 && rel < 1e-3,
          "offdiag/total=" + sci(off_ratio) + " c=" + sci(c) + " w_star=" + sci(target) + " rel=" + sci(rel)};
}

// 3. One-layer accuracy at fixed np does not move with n.
Outcome criterion_3() {
  std::vector<CurvePoint> points;
  std::string detail;
  std::uint64_t stream = 0;
  for (int n : {10, 100, 1000}) {
    ExperimentConfig c;
    c.d = 10;
    c.sigma = 1.0;
    c.n = n;
    c.p = 10.0 / n;
    c.trials = 100000;
    c.seed = derive_seed(303, stream++);
    points.push_back(mc_accuracy(c));
    RandomStream rng(derive_seed(304, stream));
    const double predicted = 1.0 - spi_error(c.n, c.p, c.sigma, c.d, 1000000, rng).value;
    detail += "n=" + std::to_string(n) + " acc=" + fmt(points.back().accuracy) + " (closed form " +
              fmt(predicted) + "); ";
  }
  bool pass = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double z = std::abs(points[i].accuracy - points[j].accuracy) / joint(points[i].std_err, points[j].std_err);
      worst = std::max(worst, z);
      pass = pass && z < 3.0;
    }
  return {pass, detail + "max pairwise z=" + fmt(worst, 2) + " (limit 3)"};
}

// 4. Stack output, extracted polynomial, its degree and the propagation surrogate.
Outcome criterion_4() {
  RandomStream rng(404);
  double worst_rel = 0.0, worst_lead = 0.0;
  bool degrees_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int depth = 1 + trial % 3;
    std::vector<AttnLayerParams> layers;
    for (int l = 0; l < depth; ++l) layers.push_back({2 * rng.uniform() - 1, 2 * rng.uniform() - 1});
    const AttnStack stack = make_stack(layers, 2 * rng.uniform() - 1);
    const int n = 1 + static_cast<int>(rng.uniform() * 8);
    const int d = 1 + static_cast<int>(rng.uniform() * 4);
    Matrix x(n, d);
    Vector y(n), q(d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = rng.normal() / std::sqrt(n);
      y[i] = rng.rademacher();
    }
    for (int j = 0; j < d; ++j) q[j] = rng.normal();
    const PolyCoeffs coeffs = extract_poly_coeffs(stack);
    const double direct = stack_forward(x, y, q, stack);
    const double viapoly = poly_predict(q, x, y, coeffs);
    worst_rel = std::max(worst_rel, std::abs(direct - viapoly) / std::max(std::abs(direct), 1e-300));

    int pow3 = 1;
    for (int l = 0; l < depth; ++l) pow3 *= 3;
    const int degree = depth == 1 ? 0 : (pow3 - 3) / 2;
    degrees_ok = degrees_ok && coeffs.degree() == degree;
    double maxc = 0.0;
    for (double v : coeffs.coeffs) maxc = std::max(maxc, std::abs(v));
    degrees_ok = degrees_ok && coeffs.coeffs.back() != 0.0;
    // Scalar instance x = sqrt(t), y = 1, query 1: f / t^(degree + 1/2) equals the
    // leading coefficient up to maxc / t from lower terms, while any term beyond
    // the degree with coefficient >= 1e-8 maxc would contribute >= maxc.
    const double t = 1e8;
    Matrix sx(1, 1);
    sx(0, 0) = std::sqrt(t);
    const Vector one = Vector::Ones(1);
    const double g = stack_forward(sx, one, one, stack) / (std::sqrt(t) * std::pow(t, degree));
    const double lead = coeffs.coeffs.back();
    worst_lead = std::max(worst_lead, std::abs(g - lead) / maxc);
  }
  bool surrogate_ok = true;
  std::string surrogate;
  for (int depth = 1; depth <= 3; ++depth) {
    std::vector<AttnLayerParams> layers(static_cast<std::size_t>(depth), {1e3, 0.0});
    layers.back().b = 1.0;
    const PolyCoeffs c = extract_poly_coeffs(make_stack(layers, 1.0));
    const auto top = std::max_element(c.coeffs.begin(), c.coeffs.end(),
                                      [](double l, double r) { return std::abs(l) < std::abs(r); }) -
                     c.coeffs.begin();
    int pow3 = 1;
    for (int l = 1; l < depth; ++l) pow3 *= 3;
    surrogate_ok = surrogate_ok && top == pow3 - 1;
    surrogate += " L" + std::to_string(depth) + "->" + std::to_string(top);
  }
  return {worst_rel < 1e-8 && degrees_ok && worst_lead < 1e-3 && surrogate_ok,
          "max rel diff=" + sci(worst_rel) + " degrees " + (degrees_ok ? "ok" : "wrong") +
              " leading-term check=" + sci(worst_lead) + " dominant index" + surrogate};
}

// 5. Semi-supervised eigen-estimator reaches the oracle error for large n.
Outcome criterion_5() {
  const auto start = std::chrono::steady_clock::now();
  const int d = 10, n = 10000;
  const double sigma = 1.0, p = 10.0 / n;
  RandomStream rng(505);
  const double alpha = optimize_alpha(d, sigma, n, p, std::nullopt, 2000, rng);
  ExperimentConfig c;
  c.d = d;
  c.sigma = sigma;
  c.n = n;
  c.p = p;
  c.trials = 10000;
  c.seed = 506;
  c.predictor = SspiInfPredictor{alpha};
  const CurvePoint cp = mc_accuracy(c);
  const double target = 1.0 - oracle_error(10.0, sigma);
  const double elapsed = seconds_since(start);
  const double gap = std::abs(cp.accuracy - target);
  return {gap < 0.01 && elapsed < 600.0,
          "alpha*=" + fmt(alpha, 3) + " acc=" + fmt(cp.accuracy) + " +- " + fmt(cp.std_err) +
              " target=" + fmt(target) + " gap=" + fmt(gap) + " runtime " + fmt(elapsed, 1) +
              "s (target < 600s)"};
}

// 6. Trained depth-2 stack beats depth 1; depth 1 matches the closed form.
Outcome criterion_6() {
  const int d = 10, n = 50;
  const double sigma = 1.0, p = 0.2;
  TrainOptions options;
  options.restarts = 3;
  options.steps = 10000;
  std::vector<CurvePoint> acc;
  std::string detail;
  for (int depth : {1, 2}) {
    RandomStream rng(derive_seed(606, static_cast<std::uint64_t>(depth)));
    const TrainResult trained = train_stack(depth, false, d, sigma, n, p, options, rng);
    ExperimentConfig c;
    c.d = d;
    c.sigma = sigma;
    c.n = n;
    c.p = p;
    c.trials = 100000;
    c.seed = 607;
    c.predictor = StackPredictor{trained.stack};
    acc.push_back(mc_accuracy(c));
    detail += "L" + std::to_string(depth) + " acc=" + fmt(acc.back().accuracy) + " (held-out " +
              fmt(trained.heldout_accuracy) + "); ";
  }
  RandomStream rng(608);
  const ErrorEstimate th = spi_error(n, p, sigma, d, 1000000, rng);
  const double depth_z = (acc[1].accuracy - acc[0].accuracy) / joint(acc[0].std_err, acc[1].std_err);
  const double spi_z = std::abs(acc[0].accuracy - (1.0 - th.value)) / joint(acc[0].std_err, th.std_err);
  return {depth_z > 2.0 && spi_z < 3.0,
          detail + "L2-L1 z=" + fmt(depth_z, 2) + " (need > 2); L1 vs 1-spi_error=" + fmt(1.0 - th.value) +
              " z=" + fmt(spi_z, 2) + " (need < 3)"};
}

// 7. Mixing weight endpoints and its trend in n.
Outcome criterion_7() {
  const int d = 10;
  const double sigma = 1.0;
  bool pass = true;
  std::string detail;
  for (std::optional<int> k : {std::optional<int>(1), std::optional<int>()}) {
    RandomStream rng(derive_seed(707, k ? 1 : 0));
    const double a = optimize_alpha(d, sigma, 50, 1.0, k, 2000, rng);
    pass = pass && a >= 0.9;
    detail += "p=1 k=" + (k ? std::to_string(*k) : std::string("inf")) + " alpha*=" + fmt(a, 3) + "; ";
  }
  // Search noise: spread of alpha* over independent objective draws.
  const int reps = 3;
  std::vector<double> mean, se;
  std::uint64_t stream = 0;
  for (int n : {10, 100, 1000, 10000}) {
    std::vector<double> v;
    for (int r = 0; r < reps; ++r) {
      RandomStream rng(derive_seed(708, stream++));
      v.push_back(optimize_alpha(d, sigma, n, 10.0 / n, std::nullopt, 2000, rng));
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / reps;
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= reps - 1;
    mean.push_back(m);
    se.push_back(std::sqrt(var / reps));
    detail += "n=" + std::to_string(n) + " alpha*=" + fmt(m, 3) + "+-" + fmt(se.back(), 3) + "; ";
  }
  for (std::size_t i = 1; i < mean.size(); ++i)
    pass = pass && mean[i] <= mean[i - 1] + 2.0 * joint(se[i], se[i - 1]) + 1e-9;
  pass = pass && mean.back() <= 0.5;
  return {pass, detail};
}

// 8. LoopTabFM properties and the synthetic gain pattern.
Outcome criterion_8() {
  const int d = 10, seeds = 100, iterations = 5;
  const double sigma = 0.3;
  const BasePredictor base = sspi_inf_base(0.5);
  bool gate = true, identity = true, empty = true;
  std::vector<double> acc(iterations + 1, 0.0);
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng(derive_seed(808, static_cast<std::uint64_t>(s)));
    const TabularSplit split = synthetic_gmm_split(d, sigma, 10, 10, 1000, rng);
    const LoopResult r = loop_tab_fm(split, iterations, base);
    for (int k = 0; k <= iterations; ++k) acc[static_cast<std::size_t>(k)] += r.per_iteration[k].test_accuracy / seeds;

    // Risk gate: the retained model is the running strict minimum of the risk,
    // so its risk never increases along the trace.
    int best_k = 0;
    for (int k = 0; k <= iterations; ++k) {
      if (r.per_iteration[k].val_risk < r.per_iteration[best_k].val_risk) best_k = k;
      gate = gate && r.best_test_trace[k] == r.per_iteration[best_k].test_accuracy;
    }
    gate = gate && r.best_iteration == best_k && r.best_val_risk == r.per_iteration[best_k].val_risk;

    // K = 0 is the base model fitted on labeled rows only.
    const LoopResult zero = loop_tab_fm(split, 0, base);
    identity = identity && zero.per_iteration.size() == 1 && zero.best_iteration == 0 &&
               zero.per_iteration[0].test_accuracy == r.per_iteration[0].test_accuracy;

    // Without unlabeled rows every loop refits the same context.
    TabularSplit bare = split;
    bare.unlabeled_x.resize(0, d);
    const LoopResult e = loop_tab_fm(bare, iterations, base);
    const LoopResult e0 = loop_tab_fm(bare, 0, base);
    for (const LoopIteration& it : e.per_iteration)
      empty = empty && it.val_risk == 0.0 && it.test_accuracy == e0.per_iteration[0].test_accuracy;
    empty = empty && e.best_iteration == 0;
  }
  const double total_gain = *std::max_element(acc.begin(), acc.end()) - acc[0];
  const double early_gain = std::max(acc[1], acc[2]) - acc[0];
  const bool pattern = acc[1] >= acc[0] && (total_gain <= 0.0 || early_gain >= 0.5 * total_gain);
  std::string detail = "mean test acc by loop:";
  for (double a : acc) detail += " " + fmt(a);
  detail += std::string("; gate ") + (gate ? "ok" : "broken") + ", K=0 " + (identity ? "ok" : "broken") +
            ", empty-unlabeled " + (empty ? "ok" : "broken");
  return {gate && identity && empty && pattern, detail};
}

int run_process(const std::string& command) {
  const int status = std::system(command.c_str());
  return status == 0 ? 0 : 1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. Byte-identical CLI outputs across repeats and thread counts.
Outcome criterion_9(const std::string& cli, const std::filesystem::path& work) {
  std::filesystem::create_directories(work);
  const json base = {{"d", 6}, {"sigma", 1.0}, {"n", 40}, {"p", 0.25}, {"trials", 2000}};
  std::vector<std::pair<std::string, json>> configs = {
      {"curve",
       {{"base", base},
        {"analytic_trials", 20000},
        {"sweep", {{"param", "np"}, {"values", {2, 5, 10}}}},
        {"alpha", {{"trials", 300}}},
        {"predictors", json::array({{{"type", "spi"}},
                                    {{"type", "sspi_k"}, {"k", 1}, {"alpha", "optimal"}},
                                    {{"type", "sspi_inf"}, {"alpha", 0.5}},
                                    {{"type", "attn_stack"}, {"layers", {{{"a", 0.01}, {"b", 0.02}}, {{"a", 0.0}, {"b", 0.02}}}}}})}}},
      {"alpha_sweep",
       {{"base", base}, {"sweep", {{"param", "n"}, {"values", {20, 80}}}}, {"alpha", {{"trials", 300}, {"ks", {1, "inf"}}}}}},
      {"train",
       {{"base", base},
        {"analytic_trials", 20000},
        {"train", {{"depths", {1, 2}}, {"restarts", 3}, {"steps", 40}, {"batch", 64}, {"eval_trials", 512}}}}},
      {"looptab", {{"base", base}, {"looptab", {{"seeds", 12}, {"iterations", 3}, {"test", 200}}}}},
      {"theory_table",
       {{"base", base}, {"analytic_trials", 20000}, {"theory", {{"grid", {{"np", {5, 40}}, {"sigma", {0.5, 1.0}}}}}}}},
  };
  bool pass = true;
  std::string detail;
  for (auto& [command, doc] : configs) {
    doc["command"] = command;
    doc["seed"] = 909;
    const std::string config = (work / (command + ".json")).string();
    std::ofstream(config) << doc.dump(2);
    std::vector<std::string> outputs;
    for (const char* tag : {"a_t1", "b_t1", "c_t8"}) {
      const std::string out = (work / (command + "_" + tag + ".out")).string();
      std::filesystem::remove(out);
      const std::string threads = tag[0] == 'c' ? "8" : "1";
      const int rc = run_process(cli + " " + command + " --config " + config + " --threads " + threads +
                                 " --out " + out + " > /dev/null");
      pass = pass && rc == 0;
      outputs.push_back(slurp(out));
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
    pass = pass && same;
    detail += command + (same ? " identical" : " DIFFERS") + "; ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli, workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the ssicl executable")->required();
  app.add_option("--workdir", workdir, "Scratch directory for CLI outputs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"one-layer error formula matches simulation", criterion_1},
      {"one-layer optimum is a scaled identity", criterion_2},
      {"one layer ignores unlabeled data", criterion_3},
      {"stack equals its extracted polynomial", criterion_4},
      {"eigen-estimator reaches the oracle error", criterion_5},
      {"depth two beats depth one after training", criterion_6},
      {"mixing weight endpoints and trend", criterion_7},
      {"self-training loop properties and gains", criterion_8},
      {"CLI outputs are deterministic", [&] { return criterion_9(cli, workdir); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << " | " << o.detail
              << " | " << fmt(seconds_since(start), 1) << "s" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
