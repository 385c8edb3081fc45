#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acdf/corrector.hpp"
#include "acdf/downscaler.hpp"
#include "acdf/evalkit.hpp"
#include "acdf/risk.hpp"
#include "acdf/scenario.hpp"
#include "json.hpp"

namespace acdf {

struct GridsConfig {
  double lon_min = 118.0;
  double lon_max = 119.0;
  double lat_min = 28.0;
  double lat_max = 28.75;
  double coarse_res = 0.125;
  double fine_res = 0.005;
};

struct EventConfig {
  std::string id;
  VortexParams vortex;
  BiasModel bias;
  std::uint64_t seed = 0;  // forecast noise stream
};

struct ScenarioConfig {
  TimePoint start{};
  std::size_t hours = 24;
  double k_tpi = 0.3;
  double k_rough = 0.2;
  TruthCoupling coupling = TruthCoupling::kBlockMean;
  TerrainSynthParams terrain;
  int tpi_radius_cells = 10;
  std::size_t stations = 60;
  int lines = 10;
  int towers_per_line = 20;
  double span_km = 0.4;
  std::vector<EventConfig> events;
};

struct CorrectorRunConfig {
  int history = kDefaultHistoryHours;
  int horizon = kDefaultHorizonHours;
  int cycle_spacing_hours = 3;
  CorrectorConfig fit;
};

struct EvalConfig {
  double val_fraction = 0.15;
  double high_wind = kHighWindSpeed;
  int cycle_spacing_hours = 6;
  double histogram_bin_width = 1.0;
  double histogram_max = 60.0;
};

struct SeedsConfig {
  std::uint64_t terrain = 1;
  std::uint64_t stations = 2;
  std::uint64_t network = 3;
  std::uint64_t eval = 4;
};

struct PathsConfig {
  std::filesystem::path output_dir = "acdf_out";
};

/// Every run option. Parsing rejects unknown keys at any depth; omitted keys
/// take the defaults above.
struct RunConfig {
  ScenarioConfig scenario;
  GridsConfig grids;
  CorrectorRunConfig corrector;
  DownscalerConfig downscaler;
  RiskConfig risk;
  FragilityTable fragility = FragilityTable::defaults();
  EvalConfig eval;
  SeedsConfig seeds;
  PathsConfig paths;

  /// Throws ConfigError with the offending key path.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  GridSpec coarse_grid() const;
  GridSpec fine_grid() const;
  RegionParams region_params() const;
};

/// Three storms crossing the default domain on parallel tracks.
std::vector<EventConfig> default_events(TimePoint start, std::size_t hours);

}  // namespace acdf
