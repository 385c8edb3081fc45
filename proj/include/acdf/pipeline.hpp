#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acdf/config.hpp"
#include "acdf/corrector.hpp"
#include "acdf/downscaler.hpp"
#include "acdf/evalkit.hpp"
#include "acdf/risk.hpp"
#include "acdf/scenario.hpp"
#include "json.hpp"

namespace acdf {

struct ScenarioData {
  Region region;
  std::vector<SyntheticEvent> events;

  /// Throws InvalidArgumentError for an unknown id.
  const SyntheticEvent& event(const std::string& id) const;
  std::vector<std::string> event_ids() const;
};

ScenarioData build_scenario(const RunConfig& config);

/// Scenario directory layout:
///   terrain.acdf, network.json,
///   events/<id>/{truth_fine,truth_coarse,forecast_coarse}.acdf, events/<id>/stations.csv
void write_scenario(const ScenarioData& scenario, const std::filesystem::path& dir);
ScenarioData read_scenario(const RunConfig& config, const std::filesystem::path& dir);

/// station_id,lat,lon,time,u,v; rows grouped by station in time order.
std::string stations_csv(const StationSeries& series);
StationSeries parse_stations_csv(const std::string& text);

struct CycleSet {
  std::vector<ForecastCycle> cycles;
  std::vector<CycleLabels> labels;
  std::vector<std::string> events;  // owning event per cycle
};

/// Cycles issued every spacing_hours over an event; observations are the
/// coarse truth and the event's stations.
void append_cycles(CycleSet& set, const SyntheticEvent& event, int history, int horizon, int spacing_hours);

/// Stage 1: least-squares fit on patch pairs of the given events, frozen.
DownscalerModel train_downscaler(const Region& region, const std::vector<const SyntheticEvent*>& events,
                                 const DownscalerConfig& config);

struct TrainResult {
  DownscalerModel downscaler;
  CorrectorModel corrector;
  nlohmann::json report;
};

/// Two-stage training on train_ids. Corrector cycles are split into train and
/// validation by the fold seed; the validation loss is reported.
TrainResult train_models(const RunConfig& config, const ScenarioData& scenario,
                         const std::vector<std::string>& train_ids, std::uint64_t split_seed);

/// The downscaled field sampled at stations, evaluated node by node with the
/// same blending as downscale_field.
StationSeries downscale_at_stations(const DownscalerModel& model, const WindField& coarse,
                                    const TerrainFeatures& terrain, const std::vector<Station>& stations);

/// Bilinear sample of a coarse field at stations.
StationSeries sample_at_stations(const WindField& field, const std::vector<Station>& stations);

/// TPI class of the fine terrain at each station.
std::vector<TerrainClass> station_classes(const Region& region);

struct StageTimer {
  std::vector<std::pair<std::string, double>> stages;  // seconds
  double total = 0.0;
  nlohmann::json to_json() const;
};

struct ForecastResult {
  WindField corrected;   // coarse, horizon steps
  WindField downscaled;  // fine, horizon steps
  StageTimer timing;
};

ForecastResult run_forecast(const Region& region, const SyntheticEvent& event, TimePoint issue,
                            const DownscalerModel& downscaler, const CorrectorModel& corrector, int history);

struct EvalResult {
  std::vector<TableRow> rows;
  nlohmann::json report;
  std::string table;
  std::map<std::string, std::string> histograms;  // file stem -> CSV
};

/// Leave-one-storm-out evaluation of raw, corrected-only and full forecasts at
/// the stations of each held-out event.
EvalResult run_eval(const RunConfig& config, const ScenarioData& scenario);

// Commands. Each writes into out_dir, adds resolved_config.json and
// manifest.json, and returns the manifest.

nlohmann::json cmd_synth(const RunConfig& config, const std::filesystem::path& out_dir);
nlohmann::json cmd_train(const RunConfig& config, const std::filesystem::path& scenario_dir,
                         const std::filesystem::path& out_dir, const std::optional<std::string>& holdout);
nlohmann::json cmd_forecast(const RunConfig& config, const std::filesystem::path& scenario_dir,
                            const std::filesystem::path& model_dir, const std::string& event_id, TimePoint issue,
                            const std::filesystem::path& out_dir);
nlohmann::json cmd_risk(const RunConfig& config, const std::filesystem::path& wind_file,
                        const std::filesystem::path& network_file, const std::filesystem::path& out_dir);
nlohmann::json cmd_eval(const RunConfig& config, const std::filesystem::path& scenario_dir,
                        const std::filesystem::path& out_dir);

/// Files under dir (manifest.json excluded) with SHA-256 digests, sorted by
/// relative path. timing.json is listed without a digest since wall-clock
/// values are not reproducible.
nlohmann::json build_manifest(const std::string& command, const std::filesystem::path& dir);

}  // namespace acdf
