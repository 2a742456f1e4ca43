// Command-line runner: ssicl <command> --config PATH [--seed N] [--out PATH] [--threads N]

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ssicl/error.hpp"
#include "ssicl/runner.hpp"
#include "ssicl/runspec.hpp"

namespace {

int report_error(const std::string& category, const std::string& message, int code) {
  const nlohmann::json err = {{"error", category}, {"message", message}};
  std::cerr << err.dump() << '\n';
  return code;
}

nlohmann::json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) ssicl::fail(ssicl::ErrorCategory::io, "cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    ssicl::fail(ssicl::ErrorCategory::parse, "config " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised in-context learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  std::optional<int> threads;

  for (const char* name : {"curve", "alpha_sweep", "train", "looptab", "theory_table"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "Overrides the configured seed");
    sub->add_option("--out", out_path, "Overrides the configured output path");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config", e.what(), ssicl::exit_code(ssicl::ErrorCategory::config));
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    nlohmann::json doc = read_config(config_path);
    if (!doc.is_object()) ssicl::fail(ssicl::ErrorCategory::config, "config root must be an object");
    if (doc.contains("command") && doc["command"] != command)
      ssicl::fail(ssicl::ErrorCategory::config,
                  "config command '" + doc["command"].dump() + "' differs from '" + command + "'");
    doc["command"] = command;
    if (seed) doc["seed"] = *seed;
    if (out_path) doc["output"] = *out_path;
    if (threads) doc["threads"] = *threads;

    const ssicl::RunSpec spec = ssicl::parse_run_spec(doc);
    ssicl::execute(spec);
    std::cout << spec.output_path << '\n';
    return 0;
  } catch (const ssicl::Error& e) {
    return report_error(std::string(ssicl::to_string(e.category())), e.what(),
                        ssicl::exit_code(e.category()));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
}
