// acdf: synthetic typhoon wind correction, downscaling and line-risk pipeline.
//
//   acdf [--config FILE] [--set key.path=value ...] synth|train|forecast|risk|eval [options]
//
// On success the run manifest is printed to stdout. On failure a JSON error
// {"error": {"kind": ..., "message": ...}} goes to stderr and the exit code
// is nonzero (1 for run errors, 2 for usage errors).

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acdf/config.hpp"
#include "acdf/errors.hpp"
#include "acdf/grid_io.hpp"
#include "acdf/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return code;
}

// key.path=value; value is parsed as JSON when possible, else taken as a string.
void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw acdf::ConfigError("--set expects key.path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw acdf::ConfigError("--set key path '" + path + "' has an empty component");
    if (!node->is_object()) throw acdf::ConfigError("--set key path '" + path + "' crosses a non-object value");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

acdf::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    const std::string text = acdf::read_file(path);
    j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw acdf::ConfigError("config " + path + " is not valid JSON");
  }
  for (const std::string& o : overrides) apply_override(j, o);
  return acdf::RunConfig::from_json(j);
}

// 2021-07-20T06:00:00Z -> 20210720T0600Z
std::string compact_time(acdf::TimePoint t) {
  const std::string s = acdf::format_utc(t);
  return s.substr(0, 4) + s.substr(5, 2) + s.substr(8, 2) + "T" + s.substr(11, 2) + s.substr(14, 2) + "Z";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typhoon wind correction, terrain-aware downscaling and transmission line risk"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "Run configuration JSON")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config value, e.g. --set risk.mc_samples=20000");

  std::string out_dir, scenario_dir, model_dir, event_id, issue_text, wind_file, network_file, holdout;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic scenario: terrain, network, truth, forecasts, stations");
  synth->add_option("-o,--out", out_dir, "Output directory (default <output_dir>/synth)");

  auto* train = app.add_subcommand("train", "Fit and freeze the downscaler, then fit the corrector through it");
  train->add_option("-s,--scenario", scenario_dir, "Scenario directory (default <output_dir>/synth)");
  train->add_option("--holdout", holdout, "Event id to leave out of training");
  train->add_option("-o,--out", out_dir, "Output directory (default <output_dir>/train)");

  auto* forecast = app.add_subcommand("forecast", "Correct and downscale one forecast cycle");
  forecast->add_option("-s,--scenario", scenario_dir, "Scenario directory (default <output_dir>/synth)");
  forecast->add_option("-m,--models", model_dir, "Directory with downscaler.json and corrector.json (default <output_dir>/train)");
  forecast->add_option("-e,--event", event_id, "Event id")->required();
  forecast->add_option("-t,--issue-time", issue_text, "Issue time, e.g. 2021-07-20T06:00:00Z")->required();
  forecast->add_option("-o,--out", out_dir, "Output directory (default <output_dir>/forecast/<event>_<issue>)");

  auto* risk = app.add_subcommand("risk", "Tower and line failure probabilities for a wind file");
  risk->add_option("-w,--wind", wind_file, "Wind grid file")->required()->check(CLI::ExistingFile);
  risk->add_option("-n,--network", network_file, "Network JSON")->required()->check(CLI::ExistingFile);
  risk->add_option("-o,--out", out_dir, "Output directory (default <output_dir>/risk)");

  auto* eval = app.add_subcommand("eval", "Leave-one-storm-out evaluation of raw, corrected-only and full forecasts");
  eval->add_option("-s,--scenario", scenario_dir, "Scenario directory (default <output_dir>/synth)");
  eval->add_option("-o,--out", out_dir, "Output directory (default <output_dir>/eval)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    const acdf::RunConfig config = load_config(config_path, overrides);
    const fs::path base = config.paths.output_dir;
    auto or_default = [](const std::string& given, const fs::path& fallback) {
      return given.empty() ? fallback : fs::path(given);
    };
    const fs::path scenario = or_default(scenario_dir, base / "synth");

    json manifest;
    if (*synth) {
      manifest = acdf::cmd_synth(config, or_default(out_dir, base / "synth"));
    } else if (*train) {
      const std::optional<std::string> h = holdout.empty() ? std::nullopt : std::optional<std::string>(holdout);
      manifest = acdf::cmd_train(config, scenario, or_default(out_dir, base / "train"), h);
    } else if (*forecast) {
      acdf::TimePoint issue;
      try {
        issue = acdf::parse_utc(issue_text);
      } catch (const acdf::Error&) {
        return fail("usage", "--issue-time must look like 2021-07-20T06:00:00Z", 2);
      }
      const fs::path out = or_default(out_dir, base / "forecast" / (event_id + "_" + compact_time(issue)));
      manifest = acdf::cmd_forecast(config, scenario, or_default(model_dir, base / "train"), event_id, issue, out);
    } else if (*risk) {
      manifest = acdf::cmd_risk(config, wind_file, network_file, or_default(out_dir, base / "risk"));
    } else if (*eval) {
      manifest = acdf::cmd_eval(config, scenario, or_default(out_dir, base / "eval"));
    }
    std::cout << manifest.dump(2) << "\n";
    return 0;
  } catch (const acdf::Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
