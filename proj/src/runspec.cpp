#include "ssicl/runspec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>

#include "ssicl/error.hpp"

namespace ssicl {
namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  fail(ErrorCategory::config, "'" + key + "': " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) config_error(where.empty() ? item.key() : where + "." + item.key(), "unknown key");
  }
}

std::string join(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

double read_real(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(join(where, key), "expected a number");
  return v.get<double>();
}

long read_int(const json& obj, const std::string& where, const char* key, long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) config_error(join(where, key), "expected an integer");
  return v.get<long>();
}

bool read_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) config_error(join(where, key), "expected true or false");
  return v.get<bool>();
}

std::string read_string(const json& obj, const std::string& where, const char* key,
                        const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) config_error(join(where, key), "expected a string");
  return v.get<std::string>();
}

std::vector<double> read_reals(const json& v, const std::string& where) {
  if (!v.is_array()) config_error(where, "expected an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) config_error(where, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// JSON integers stay integers on output so round trips compare equal.
json number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) return json(static_cast<long>(v));
  return json(v);
}

json numbers(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(number(v));
  return out;
}

json alpha_json(double alpha, bool optimal) { return optimal ? json("optimal") : json(alpha); }

double read_alpha(const json& obj, const std::string& where, bool& optimal) {
  optimal = false;
  if (!obj.contains("alpha")) return 0.5;
  const json& v = obj.at("alpha");
  if (v.is_string() && v.get<std::string>() == "optimal") {
    optimal = true;
    return 0.5;
  }
  if (!v.is_number()) config_error(join(where, "alpha"), "expected a number in [0, 1] or \"optimal\"");
  const double a = v.get<double>();
  if (!(a >= 0.0 && a <= 1.0)) config_error(join(where, "alpha"), "must lie in [0, 1]");
  return a;
}

void positive(long value, const std::string& key) {
  if (value < 1) config_error(key, "must be at least 1");
}

}  // namespace

std::string to_string(Command command) {
  switch (command) {
    case Command::curve: return "curve";
    case Command::alpha_sweep: return "alpha_sweep";
    case Command::train: return "train";
    case Command::looptab: return "looptab";
    case Command::theory_table: return "theory_table";
  }
  return "curve";
}

Command parse_command(const std::string& text) {
  for (Command c : {Command::curve, Command::alpha_sweep, Command::train, Command::looptab,
                    Command::theory_table})
    if (to_string(c) == text) return c;
  config_error("command", "unknown command '" + text + "'");
}

json predictor_to_json(const PredictorSpec& spec) {
  json out;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SpiPredictor>) {
          out = {{"type", "spi"}};
        } else if constexpr (std::is_same_v<T, SspiKPredictor>) {
          out = {{"type", "sspi_k"}, {"k", p.k}, {"alpha", alpha_json(p.alpha, spec.optimal_alpha)}};
        } else if constexpr (std::is_same_v<T, SspiInfPredictor>) {
          out = {{"type", "sspi_inf"}, {"alpha", alpha_json(p.alpha, spec.optimal_alpha)}};
        } else if constexpr (std::is_same_v<T, StackPredictor>) {
          json layers = json::array();
          for (const auto& l : p.stack.layers) layers.push_back({{"a", l.a}, {"b", l.b}});
          out = {{"type", "attn_stack"},
                 {"layers", layers},
                 {"head_scale", p.stack.head_scale},
                 {"looped", p.stack.looped},
                 {"loops", p.stack.loops}};
        } else {
          out = {{"type", "poly"}, {"coeffs", p.coeffs.coeffs}};
        }
      },
      spec.predictor);
  return out;
}

PredictorSpec predictor_from_json(const json& doc) {
  const std::string where = "predictor";
  if (!doc.is_object()) config_error(where, "expected an object");
  const std::string type = read_string(doc, where, "type", "");
  PredictorSpec spec;
  if (type == "spi") {
    check_keys(doc, where, {"type"});
    spec.predictor = SpiPredictor{};
  } else if (type == "sspi_k") {
    check_keys(doc, where, {"type", "k", "alpha"});
    SspiKPredictor p;
    p.k = static_cast<int>(read_int(doc, where, "k", 1));
    if (p.k < 0) config_error(where + ".k", "must be nonnegative");
    p.alpha = read_alpha(doc, where, spec.optimal_alpha);
    spec.predictor = p;
  } else if (type == "sspi_inf") {
    check_keys(doc, where, {"type", "alpha"});
    SspiInfPredictor p;
    p.alpha = read_alpha(doc, where, spec.optimal_alpha);
    spec.predictor = p;
  } else if (type == "attn_stack") {
    check_keys(doc, where, {"type", "layers", "head_scale", "looped", "loops"});
    if (!doc.contains("layers") || !doc.at("layers").is_array() || doc.at("layers").empty())
      config_error(where + ".layers", "expected a nonempty array of {a, b}");
    std::vector<AttnLayerParams> layers;
    for (const json& l : doc.at("layers")) {
      check_keys(l, where + ".layers", {"a", "b"});
      layers.push_back({read_real(l, where + ".layers", "a", 0.0), read_real(l, where + ".layers", "b", 0.0)});
    }
    const double head = read_real(doc, where, "head_scale", 1.0);
    const bool looped = read_bool(doc, where, "looped", false);
    const long loops = read_int(doc, where, "loops", 1);
    positive(loops, where + ".loops");
    if (looped) {
      if (layers.size() != 1) config_error(where + ".layers", "a looped stack has exactly one layer");
      spec.predictor = StackPredictor{make_looped_stack(layers.front(), static_cast<int>(loops), head)};
    } else {
      if (loops != 1) config_error(where + ".loops", "must be 1 unless looped");
      spec.predictor = StackPredictor{make_stack(std::move(layers), head)};
    }
  } else if (type == "poly") {
    check_keys(doc, where, {"type", "coeffs"});
    if (!doc.contains("coeffs")) config_error(where + ".coeffs", "missing");
    PolyCoeffs c{read_reals(doc.at("coeffs"), where + ".coeffs")};
    if (c.coeffs.empty()) config_error(where + ".coeffs", "must be nonempty");
    spec.predictor = PolyPredictor{std::move(c)};
  } else {
    config_error(where + ".type", "unknown predictor '" + type + "'");
  }
  return spec;
}

RunSpec parse_run_spec(const json& doc) {
  check_keys(doc, "", {"command", "seed", "threads", "output", "base", "sweep", "predictors",
                       "analytic_trials", "alpha", "train", "looptab", "theory"});
  RunSpec spec;
  if (!doc.contains("command")) config_error("command", "missing");
  spec.command = parse_command(read_string(doc, "", "command", ""));
  if (!doc.contains("seed")) config_error("seed", "missing; every run needs an explicit seed");
  const json& seed = doc.at("seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long>() >= 0))
    config_error("seed", "expected a nonnegative integer");
  spec.base.seed = seed.get<std::uint64_t>();
  spec.base.threads = static_cast<int>(read_int(doc, "", "threads", 1));
  positive(spec.base.threads, "threads");
  spec.output_path = read_string(doc, "", "output", "");
  spec.analytic_trials = read_int(doc, "", "analytic_trials", spec.analytic_trials);
  positive(spec.analytic_trials, "analytic_trials");

  if (doc.contains("base")) {
    const json& b = doc.at("base");
    check_keys(b, "base", {"d", "sigma", "n", "p", "trials"});
    spec.base.d = static_cast<int>(read_int(b, "base", "d", spec.base.d));
    spec.base.sigma = read_real(b, "base", "sigma", spec.base.sigma);
    spec.base.n = static_cast<int>(read_int(b, "base", "n", spec.base.n));
    spec.base.p = read_real(b, "base", "p", spec.base.p);
    spec.base.trials = read_int(b, "base", "trials", spec.base.trials);
  }
  positive(spec.base.d, "base.d");
  positive(spec.base.n, "base.n");
  positive(spec.base.trials, "base.trials");
  if (!(spec.base.sigma >= 0.0)) config_error("base.sigma", "must be nonnegative");
  if (!(spec.base.p >= 0.0 && spec.base.p <= 1.0)) config_error("base.p", "must lie in [0, 1]");

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    check_keys(s, "sweep", {"param", "values"});
    spec.sweep.param = read_string(s, "sweep", "param", spec.sweep.param);
    static const char* const kParams[] = {"np", "n", "p", "sigma", "d"};
    if (std::none_of(std::begin(kParams), std::end(kParams),
                     [&](const char* p) { return spec.sweep.param == p; }))
      config_error("sweep.param", "unknown parameter '" + spec.sweep.param + "'");
    if (s.contains("values")) spec.sweep.values = read_reals(s.at("values"), "sweep.values");
  }

  if (doc.contains("predictors")) {
    const json& ps = doc.at("predictors");
    if (!ps.is_array() || ps.empty()) config_error("predictors", "expected a nonempty array");
    spec.predictors.clear();
    for (const json& p : ps) spec.predictors.push_back(predictor_from_json(p));
  }

  if (doc.contains("alpha")) {
    const json& a = doc.at("alpha");
    check_keys(a, "alpha", {"trials", "ks"});
    spec.alpha.trials = read_int(a, "alpha", "trials", spec.alpha.trials);
    positive(spec.alpha.trials, "alpha.trials");
    if (a.contains("ks")) {
      const json& ks = a.at("ks");
      if (!ks.is_array() || ks.empty()) config_error("alpha.ks", "expected a nonempty array");
      spec.alpha.ks.clear();
      for (const json& k : ks) {
        if (k.is_string() && k.get<std::string>() == "inf") spec.alpha.ks.push_back(std::nullopt);
        else if (k.is_number_integer() && k.get<long>() >= 0) spec.alpha.ks.push_back(k.get<int>());
        else config_error("alpha.ks", "entries must be nonnegative integers or \"inf\"");
      }
    }
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    check_keys(t, "train", {"depths", "looped", "restarts", "steps", "batch", "learning_rate",
                            "fd_step", "eval_trials"});
    if (t.contains("depths")) {
      spec.train.depths.clear();
      for (double v : read_reals(t.at("depths"), "train.depths")) {
        if (v != std::floor(v) || v < 1 || v > kMaxExtractDepth)
          config_error("train.depths", "entries must be integers in [1, 6]");
        spec.train.depths.push_back(static_cast<int>(v));
      }
    }
    TrainOptions& o = spec.train.options;
    spec.train.looped = read_bool(t, "train", "looped", false);
    o.restarts = static_cast<int>(read_int(t, "train", "restarts", o.restarts));
    o.steps = static_cast<int>(read_int(t, "train", "steps", o.steps));
    o.batch = static_cast<int>(read_int(t, "train", "batch", o.batch));
    o.learning_rate = read_real(t, "train", "learning_rate", o.learning_rate);
    o.fd_step = read_real(t, "train", "fd_step", o.fd_step);
    o.eval_trials = read_int(t, "train", "eval_trials", o.eval_trials);
    positive(o.restarts, "train.restarts");
    positive(o.batch, "train.batch");
    positive(o.eval_trials, "train.eval_trials");
    if (o.steps < 0) config_error("train.steps", "must be nonnegative");
    if (!(o.learning_rate > 0.0)) config_error("train.learning_rate", "must be positive");
    if (!(o.fd_step > 0.0)) config_error("train.fd_step", "must be positive");
  }

  if (doc.contains("looptab")) {
    const json& l = doc.at("looptab");
    LoopTabSpec& s = spec.looptab;
    check_keys(l, "looptab", {"source", "path", "label_column", "missing_token", "test_fraction",
                              "iterations", "base", "standardize", "seeds", "labeled",
                              "unlabeled", "test"});
    s.source = read_string(l, "looptab", "source", s.source);
    if (s.source != "synthetic" && s.source != "csv")
      config_error("looptab.source", "expected \"synthetic\" or \"csv\"");
    s.path = read_string(l, "looptab", "path", s.path);
    s.label_column = read_string(l, "looptab", "label_column", s.label_column);
    s.missing_token = read_string(l, "looptab", "missing_token", s.missing_token);
    s.test_fraction = read_real(l, "looptab", "test_fraction", s.test_fraction);
    s.iterations = static_cast<int>(read_int(l, "looptab", "iterations", s.iterations));
    if (l.contains("base")) s.base = predictor_from_json(l.at("base"));
    s.standardize = read_bool(l, "looptab", "standardize", s.standardize);
    s.seeds = static_cast<int>(read_int(l, "looptab", "seeds", s.seeds));
    s.labeled = static_cast<int>(read_int(l, "looptab", "labeled", s.labeled));
    s.unlabeled = static_cast<int>(read_int(l, "looptab", "unlabeled", s.unlabeled));
    s.test = static_cast<int>(read_int(l, "looptab", "test", s.test));
    if (s.iterations < 0) config_error("looptab.iterations", "must be nonnegative");
    if (!(s.test_fraction >= 0.0 && s.test_fraction < 1.0))
      config_error("looptab.test_fraction", "must lie in [0, 1)");
    positive(s.seeds, "looptab.seeds");
    if (s.labeled < 2) config_error("looptab.labeled", "must be at least 2");
    if (s.unlabeled < 0 || s.test < 0) config_error("looptab", "split sizes must be nonnegative");
    if (s.source == "csv" && s.path.empty()) config_error("looptab.path", "required for csv source");
    if (s.base.optimal_alpha) config_error("looptab.base.alpha", "must be a number");
  }

  if (doc.contains("theory")) {
    const json& t = doc.at("theory");
    check_keys(t, "theory", {"grid"});
    if (t.contains("grid")) {
      const json& g = t.at("grid");
      check_keys(g, "theory.grid", {"n", "np", "sigma", "d"});
      if (g.contains("n")) spec.theory.n = read_reals(g.at("n"), "theory.grid.n");
      if (g.contains("np")) spec.theory.np = read_reals(g.at("np"), "theory.grid.np");
      if (g.contains("sigma")) spec.theory.sigma = read_reals(g.at("sigma"), "theory.grid.sigma");
      if (g.contains("d")) spec.theory.d = read_reals(g.at("d"), "theory.grid.d");
    }
  }
  return spec;
}

json to_json(const RunSpec& spec) {
  json doc;
  doc["command"] = to_string(spec.command);
  doc["seed"] = spec.base.seed;
  doc["threads"] = spec.base.threads;
  if (!spec.output_path.empty()) doc["output"] = spec.output_path;
  doc["analytic_trials"] = spec.analytic_trials;
  doc["base"] = {{"d", spec.base.d},
                 {"sigma", spec.base.sigma},
                 {"n", spec.base.n},
                 {"p", spec.base.p},
                 {"trials", spec.base.trials}};
  doc["sweep"] = {{"param", spec.sweep.param}, {"values", numbers(spec.sweep.values)}};
  json preds = json::array();
  for (const auto& p : spec.predictors) preds.push_back(predictor_to_json(p));
  doc["predictors"] = preds;
  json ks = json::array();
  for (const auto& k : spec.alpha.ks) ks.push_back(k ? json(*k) : json("inf"));
  doc["alpha"] = {{"trials", spec.alpha.trials}, {"ks", ks}};
  const TrainOptions& o = spec.train.options;
  doc["train"] = {{"depths", spec.train.depths},  {"looped", spec.train.looped},
                  {"restarts", o.restarts},       {"steps", o.steps},
                  {"batch", o.batch},             {"learning_rate", o.learning_rate},
                  {"fd_step", o.fd_step},         {"eval_trials", o.eval_trials}};
  const LoopTabSpec& l = spec.looptab;
  doc["looptab"] = {{"source", l.source},
                    {"path", l.path},
                    {"label_column", l.label_column},
                    {"missing_token", l.missing_token},
                    {"test_fraction", l.test_fraction},
                    {"iterations", l.iterations},
                    {"base", predictor_to_json(l.base)},
                    {"standardize", l.standardize},
                    {"seeds", l.seeds},
                    {"labeled", l.labeled},
                    {"unlabeled", l.unlabeled},
                    {"test", l.test}};
  json grid = json::object();
  if (spec.theory.n) grid["n"] = numbers(*spec.theory.n);
  if (spec.theory.np) grid["np"] = numbers(*spec.theory.np);
  if (spec.theory.sigma) grid["sigma"] = numbers(*spec.theory.sigma);
  if (spec.theory.d) grid["d"] = numbers(*spec.theory.d);
  doc["theory"] = {{"grid", grid}};
  return doc;
}

RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::parse, "config " + path + ": " + e.what());
  }
  return parse_run_spec(doc);
}

}  // namespace ssicl
