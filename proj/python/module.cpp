#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ssicl/attention.hpp"
#include "ssicl/error.hpp"
#include "ssicl/estimators.hpp"
#include "ssicl/experiments.hpp"
#include "ssicl/looptab.hpp"
#include "ssicl/runner.hpp"
#include "ssicl/runspec.hpp"
#include "ssicl/theory.hpp"

namespace py = pybind11;
using namespace ssicl;

namespace {

using Layers = std::vector<std::pair<double, double>>;

AttnStack to_stack(const Layers& layers, double head_scale, int loops) {
  std::vector<AttnLayerParams> params;
  for (const auto& [a, b] : layers) params.push_back({a, b});
  if (loops > 1) {
    if (params.size() != 1) fail(ErrorCategory::invalid_argument, "a looped stack has exactly one layer");
    return make_looped_stack(params.front(), loops, head_scale);
  }
  return make_stack(std::move(params), head_scale);
}

std::string run_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCategory::parse, e.what());
  }
  const RunSpec spec = parse_run_spec(doc);
  switch (spec.command) {
    case Command::curve: return run_curve(spec);
    case Command::alpha_sweep: return run_alpha_sweep(spec);
    case Command::train: return run_train(spec).dump(2) + "\n";
    case Command::looptab: return run_looptab(spec).dump(2) + "\n";
    case Command::theory_table: return run_theory_table(spec).dump(2) + "\n";
  }
  return {};
}

py::dict loop_result_dict(const LoopResult& r) {
  py::list per;
  for (const auto& it : r.per_iteration) {
    py::dict d;
    d["val_risk"] = it.val_risk;
    d["test_accuracy"] = it.test_accuracy;
    per.append(d);
  }
  py::dict out;
  out["per_iteration"] = per;
  out["best_iteration"] = r.best_iteration;
  out["best_val_risk"] = r.best_val_risk;
  out["best_test_accuracy"] = r.best_test_accuracy;
  out["best_test_trace"] = r.best_test_trace;
  out["final_soft_labels"] = r.final_soft_labels;
  return out;
}

}  // namespace

PYBIND11_MODULE(_ssicl, m) {
  m.doc() = "Semi-supervised in-context learning estimators, theory and experiments";
  m.attr("__version__") = "0.1.0";

  // Messages carry the machine-readable category as a "category: " prefix.
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::exception<Error>(m, "SsiclError", PyExc_ValueError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type.get_stored().ptr(),
                      (std::string(to_string(e.category())) + ": " + e.what()).c_str());
    }
  });

  m.def("q_function", &q_function, py::arg("x"));
  m.def(
      "spi_error",
      [](int n, double p, double sigma, int d, long trials, std::uint64_t seed, bool fixed_m, int threads) {
        RandomStream rng(seed);
        const ErrorEstimate e = spi_error(n, p, sigma, d, trials, rng,
                                          fixed_m ? LabelCount::fixed : LabelCount::binomial, threads);
        return std::make_pair(e.value, e.std_err);
      },
      py::arg("n"), py::arg("p"), py::arg("sigma"), py::arg("d"), py::arg("trials") = 1000000,
      py::arg("seed") = 0, py::arg("fixed_m") = false, py::arg("threads") = 1,
      "(error, std_err) of sign(x^T mu_s).");
  m.def("spi_error_upper", &spi_error_upper, py::arg("n"), py::arg("p"), py::arg("sigma"), py::arg("d"));
  m.def("oracle_error", &oracle_error, py::arg("np"), py::arg("sigma"));
  m.def("w_star_scalar", &w_star_scalar, py::arg("n"), py::arg("p"), py::arg("sigma"), py::arg("d"));
  m.def("reduced_loss", &reduced_loss, py::arg("w"), py::arg("n"), py::arg("p"), py::arg("sigma"),
        py::arg("d"));
  m.def("nonasymp_bound", &nonasymp_bound, py::arg("n"), py::arg("d"), py::arg("sigma"), py::arg("c_const"));

  m.def("spi", py::overload_cast<const Matrix&, const Vector&>(&spi), py::arg("x"), py::arg("y_obs"));
  m.def("sspi_k", py::overload_cast<const Matrix&, const Vector&, double, int, double>(&sspi_k),
        py::arg("x"), py::arg("y_obs"), py::arg("sigma"), py::arg("k"), py::arg("alpha"));
  m.def(
      "sspi_inf",
      [](const Matrix& x, const Vector& y, double sigma, double alpha) {
        return sspi_inf(x, y, sigma, alpha).estimate;
      },
      py::arg("x"), py::arg("y_obs"), py::arg("sigma"), py::arg("alpha"));
  m.def(
      "poly_predict",
      [](const Vector& q, const Matrix& x, const Vector& y, std::vector<double> coeffs) {
        return poly_predict(q, x, y, PolyCoeffs{std::move(coeffs)});
      },
      py::arg("query"), py::arg("x"), py::arg("y_obs"), py::arg("coeffs"));

  m.def(
      "stack_forward",
      [](const Matrix& x, const Vector& y, const Vector& q, const Layers& layers, double head_scale,
         int loops) { return stack_forward(x, y, q, to_stack(layers, head_scale, loops)); },
      py::arg("x"), py::arg("y_obs"), py::arg("query"), py::arg("layers"), py::arg("head_scale") = 1.0,
      py::arg("loops") = 1, "Stack output for layers given as (a, b) gain pairs.");
  m.def(
      "extract_poly_coeffs",
      [](const Layers& layers, double head_scale, int loops) {
        return extract_poly_coeffs(to_stack(layers, head_scale, loops)).coeffs;
      },
      py::arg("layers"), py::arg("head_scale") = 1.0, py::arg("loops") = 1);
  m.def("max_poly_degree", &max_poly_degree, py::arg("depth"));

  m.def(
      "optimize_alpha",
      [](int d, double sigma, int n, double p, std::optional<int> k, long trials, std::uint64_t seed,
         int threads) {
        RandomStream rng(seed);
        return optimize_alpha(d, sigma, n, p, k, trials, rng, threads);
      },
      py::arg("d"), py::arg("sigma"), py::arg("n"), py::arg("p"), py::arg("k") = py::none(),
      py::arg("trials") = 2000, py::arg("seed") = 0, py::arg("threads") = 1,
      "Minimizer of 1 - E[cos] over alpha in [0, 1]; k=None is the eigenvector variant.");

  m.def(
      "loop_tab",
      [](const Matrix& labeled_x, const Vector& labeled_y, const Matrix& unlabeled_x, const Matrix& test_x,
         const Vector& test_y, int iterations, const std::string& base, double alpha, bool standardize) {
        TabularSplit split;
        split.labeled_x = labeled_x;
        split.labeled_y = labeled_y;
        split.unlabeled_x = unlabeled_x;
        split.test_x = test_x;
        split.test_y = test_y;
        BasePredictor predictor;
        if (base == "spi") predictor = spi_base();
        else if (base == "sspi_inf") predictor = sspi_inf_base(alpha);
        else fail(ErrorCategory::invalid_argument, "base must be 'spi' or 'sspi_inf'");
        return loop_result_dict(loop_tab_fm(split, iterations, predictor, LoopOptions{standardize}));
      },
      py::arg("labeled_x"), py::arg("labeled_y"), py::arg("unlabeled_x"), py::arg("test_x"),
      py::arg("test_y"), py::arg("iterations") = 5, py::arg("base") = "sspi_inf", py::arg("alpha") = 0.5,
      py::arg("standardize") = true);
  m.def("val_risk", &val_risk, py::arg("soft_labels"));

  m.def("run_config", &run_config, py::arg("config_json"),
        "Runs a JSON run configuration and returns its CSV or JSON output as text.");
}
