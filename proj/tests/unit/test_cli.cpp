#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "helpers.hpp"
#include "ssicl/csv.hpp"
#include "ssicl/runner.hpp"
#include "ssicl/runspec.hpp"
#include "ssicl/theory.hpp"

using namespace ssicl;
using json = nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  const std::filesystem::path dir(SSICL_TEST_TMP);
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  return read_csv_records(in);
}

json full_config() {
  return json::parse(R"({
    "command": "curve",
    "seed": 17,
    "threads": 2,
    "output": "out.csv",
    "analytic_trials": 5000,
    "base": {"d": 6, "sigma": 0.75, "n": 40, "p": 0.25, "trials": 300},
    "sweep": {"param": "np", "values": [2, 4.5, 10]},
    "predictors": [
      {"type": "spi"},
      {"type": "sspi_k", "k": 3, "alpha": "optimal"},
      {"type": "sspi_inf", "alpha": 0.25},
      {"type": "attn_stack", "layers": [{"a": 0.125, "b": -0.5}, {"a": 0.0, "b": 1.0}],
       "head_scale": 2.0, "looped": false, "loops": 1},
      {"type": "attn_stack", "layers": [{"a": 0.5, "b": 0.25}], "head_scale": 1.0,
       "looped": true, "loops": 3},
      {"type": "poly", "coeffs": [1.0, 0.5, -0.25]}
    ],
    "alpha": {"trials": 400, "ks": [1, "inf"]},
    "train": {"depths": [1, 3], "looped": true, "restarts": 4, "steps": 50, "batch": 64,
              "learning_rate": 0.005, "fd_step": 0.001, "eval_trials": 512},
    "looptab": {"source": "csv", "path": "data.csv", "label_column": "y", "missing_token": "NA",
                "test_fraction": 0.25, "iterations": 3, "base": {"type": "spi"},
                "standardize": false, "seeds": 7, "labeled": 12, "unlabeled": 30, "test": 100},
    "theory": {"grid": {"n": [50, 100], "np": [10], "sigma": [0.5, 1.5], "d": [10]}}
  })");
}

json curve_config(const std::string& out) {
  return {{"command", "curve"},
          {"seed", 5},
          {"output", out},
          {"analytic_trials", 2000},
          {"base", {{"d", 5}, {"sigma", 1.0}, {"n", 30}, {"p", 0.2}, {"trials", 400}}},
          {"sweep", {{"param", "np"}, {"values", {2, 6, 12}}}},
          {"predictors", json::array({{{"type", "spi"}}, {{"type", "sspi_inf"}, {"alpha", 0.5}}})}};
}

#ifdef SSICL_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(SSICL_CLI_PATH) + " " + args + " >/dev/null 2>" +
                          temp_path("cli_stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config round trip") {
  const json doc = full_config();
  const RunSpec spec = parse_run_spec(doc);
  CHECK(to_json(spec) == doc);
  CHECK(spec.predictors.size() == 6);
  CHECK(spec.predictors[1].optimal_alpha);
  CHECK(spec.alpha.ks[1] == std::nullopt);
  CHECK(spec.train.options.restarts == 4);
  const RunSpec again = parse_run_spec(to_json(spec));
  CHECK(to_json(again) == to_json(spec));
}

TEST_CASE("minimal config fills defaults") {
  const RunSpec spec = parse_run_spec(json{{"command", "theory_table"}, {"seed", 0}});
  CHECK(spec.command == Command::theory_table);
  CHECK(spec.base.d == 10);
  CHECK(spec.base.n == 50);
  CHECK(spec.base.p == 0.2);
  CHECK(spec.looptab.base.predictor.index() == 2);
  CHECK(parse_run_spec(to_json(spec)).base.trials == spec.base.trials);
}

TEST_CASE("config errors") {
  json doc = full_config();
  doc["colour"] = "blue";
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc.erase("seed");
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["seed"] = -3;
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["sweep"]["param"] = "temperature";
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["base"]["p"] = 1.5;
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["predictors"][0]["type"] = "oracle";
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["predictors"][2]["alpha"] = 2.0;
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["train"]["depths"] = {7};
  CHECK_CATEGORY(parse_run_spec(doc), config);
  doc = full_config();
  doc["command"] = "plot";
  CHECK_CATEGORY(parse_run_spec(doc), config);
  CHECK_CATEGORY(load_run_spec(temp_path("missing_config.json")), io);
  std::ofstream(temp_path("broken.json")) << "{\"seed\": ";
  CHECK_CATEGORY(load_run_spec(temp_path("broken.json")), parse);
}

TEST_CASE("sweep application") {
  ExperimentConfig base;
  base.n = 50;
  base.p = 0.2;
  CHECK(apply_sweep(base, "np", 5).p == doctest::Approx(0.1));
  const ExperimentConfig n_sweep = apply_sweep(base, "n", 1000);
  CHECK(n_sweep.n == 1000);
  CHECK(n_sweep.n * n_sweep.p == doctest::Approx(10.0));
  CHECK(apply_sweep(base, "sigma", 0.3).sigma == 0.3);
  CHECK(apply_sweep(base, "d", 4).d == 4);
  CHECK_CATEGORY(apply_sweep(base, "np", 60), config);
  CHECK_CATEGORY(apply_sweep(base, "n", 5), config);
  CHECK_CATEGORY(apply_sweep(base, "d", 2.5), config);
  CHECK_CATEGORY(apply_sweep(base, "p", 0.0), config);
  CHECK_CATEGORY(apply_sweep(base, "beta", 1.0), config);
}

TEST_CASE("predictor labels") {
  CHECK(predictor_label({SpiPredictor{}, false}) == "spi");
  CHECK(predictor_label({SspiKPredictor{1, 0.5}, true}) == "sspi_k1@opt");
  CHECK(predictor_label({SspiInfPredictor{0.5}, false}) == "sspi_inf@0.5");
  CHECK(predictor_label({StackPredictor{make_stack({{0, 1}, {0, 1}}, 1)}, false}) == "attn_stack_L2");
  CHECK(predictor_label({StackPredictor{make_looped_stack({0, 1}, 3, 1)}, false}) == "looped_L3");
  CHECK(predictor_label({PolyPredictor{{{1, 2, 3, 4}}}, false}) == "poly_deg3");
}

TEST_CASE("curve output shape and determinism") {
  const RunSpec spec = parse_run_spec(curve_config(""));
  const std::string text = run_curve(spec);
  const auto rows = parse_csv(text);
  REQUIRE(rows.size() == 1 + 3 * 2);
  CHECK(rows[0] == CsvRow{"sweep_value", "predictor", "accuracy", "std_err", "analytic_reference"});
  CHECK(rows[1][0] == "2");
  CHECK(rows[1][1] == "spi");
  CHECK(rows[2][1] == "sspi_inf@0.5");
  double oracle_acc = 0.0;
  REQUIRE(parse_double(rows[2][4], oracle_acc));
  CHECK(oracle_acc == doctest::Approx(1.0 - oracle_error(2.0, 1.0)).epsilon(1e-15));
  CHECK(run_curve(spec) == text);

  RunSpec threaded = spec;
  threaded.base.threads = 3;
  CHECK(run_curve(threaded) == text);

  RunSpec empty = spec;
  empty.sweep.values.clear();
  CHECK_CATEGORY(run_curve(empty), config);
}

TEST_CASE("alpha sweep output") {
  json doc = curve_config("");
  doc["command"] = "alpha_sweep";
  doc["alpha"] = {{"trials", 200}, {"ks", {0, 2, "inf"}}};
  const auto rows = parse_csv(run_alpha_sweep(parse_run_spec(doc)));
  REQUIRE(rows.size() == 1 + 3 * 3);
  CHECK(rows[1][1] == "0");
  CHECK(rows[1][2] == "1");
  CHECK(rows[3][1] == "inf");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double at_star = 0.0, at_one = 0.0;
    REQUIRE(parse_double(rows[i][3], at_star));
    REQUIRE(parse_double(rows[i][4], at_one));
    CHECK(at_star <= at_one);
  }
}

TEST_CASE("theory table records") {
  json doc = {{"command", "theory_table"}, {"seed", 1}, {"analytic_trials", 20000},
              {"theory", {{"grid", {{"n", {200}}, {"np", {10, 100}}, {"sigma", {1.0}}, {"d", {10, 2}}}}}}};
  const json table = run_theory_table(parse_run_spec(doc));
  REQUIRE(table.size() == 4);
  for (const json& r : table) {
    CHECK(r.contains("inputs"));
    CHECK(r["spi_error"]["value"].is_number());
    CHECK(r["spi_error_upper"].is_number());
    CHECK(r["oracle_error"].is_number());
    CHECK(r["w_star"].is_number());
    const double np = r["inputs"]["np"].get<double>();
    const int d = r["inputs"]["d"].get<int>();
    if (np >= 8.0 * d) CHECK(r["upper_ge_spi_error"] == true);
    else CHECK(r["upper_ge_spi_error"].is_null());
  }
  doc["theory"]["grid"]["np"] = json::array();
  CHECK(run_theory_table(parse_run_spec(doc)) == json::array());
}

TEST_CASE("synthetic looptab report") {
  json doc = {{"command", "looptab"}, {"seed", 3}, {"base", {{"d", 4}, {"sigma", 0.5}}},
              {"looptab", {{"seeds", 6}, {"iterations", 2}, {"test", 50}}}};
  const RunSpec spec = parse_run_spec(doc);
  const json report = run_looptab(spec);
  CHECK(report["mean_test_accuracy"].size() == 3);
  CHECK(report["best_iteration_counts"].size() == 3);
  int total = 0;
  for (const json& c : report["best_iteration_counts"]) total += c.get<int>();
  CHECK(total == 6);
  RunSpec threaded = spec;
  threaded.base.threads = 4;
  CHECK(run_looptab(threaded) == report);
}

TEST_CASE("csv looptab report") {
  RandomStream rng(4);
  TabularSplit split = synthetic_gmm_split(3, 0.5, 8, 8, 0, rng);
  for (int i = 0; i < 8; ++i) split.labeled_y[i] = i % 2 ? 1.0 : -1.0;
  const std::string data = temp_path("looptab_input.csv");
  write_csv(split, data, "y", "NA");
  json doc = {{"command", "looptab"}, {"seed", 3},
              {"looptab", {{"source", "csv"}, {"path", data}, {"label_column", "y"},
                           {"missing_token", "NA"}, {"iterations", 2}, {"test_fraction", 0.25}}}};
  const json report = run_looptab(parse_run_spec(doc));
  CHECK(report["rows"]["labeled"] == 6);
  CHECK(report["rows"]["unlabeled"] == 8);
  CHECK(report["rows"]["test"] == 2);
  CHECK(report["per_iteration"].size() == 3);
}

TEST_CASE("execute writes outputs and checks paths") {
  RunSpec spec = parse_run_spec(curve_config(temp_path("curve.csv")));
  execute(spec);
  CHECK(slurp(spec.output_path) == run_curve(spec));
  spec.output_path = temp_path("no_such_dir/curve.csv");
  CHECK_CATEGORY(execute(spec), io);
  spec.output_path.clear();
  CHECK_CATEGORY(execute(spec), config);
  CHECK_CATEGORY(write_text(temp_path("no_such_dir/x.txt"), "x"), io);
}

#ifdef SSICL_CLI_PATH
TEST_CASE("command-line exit codes") {
  const std::string config = temp_path("cli_curve.json");
  std::ofstream(config) << curve_config(temp_path("cli_curve.csv")).dump();
  CHECK(run_cli("curve --config " + config) == 0);
  const std::string first = slurp(temp_path("cli_curve.csv"));
  CHECK(run_cli("curve --config " + config + " --threads 4 --out " + temp_path("cli_curve_t4.csv")) == 0);
  CHECK(slurp(temp_path("cli_curve_t4.csv")) == first);
  CHECK(run_cli("curve --config " + config + " --seed 6 --out " + temp_path("cli_curve_s6.csv")) == 0);
  CHECK(slurp(temp_path("cli_curve_s6.csv")) != first);

  CHECK(run_cli("curve --config " + config + " --out " + temp_path("no_such_dir/a.csv")) ==
        exit_code(ErrorCategory::io));
  CHECK(run_cli("train --config " + config) == exit_code(ErrorCategory::config));
  CHECK(run_cli("curve --config " + temp_path("absent.json")) == exit_code(ErrorCategory::io));
  CHECK(run_cli("curve") == exit_code(ErrorCategory::config));
  const std::string err = slurp(temp_path("cli_stderr.txt"));
  CHECK(json::parse(err)["error"] == "config");
}
#endif

}  // TEST_SUITE
