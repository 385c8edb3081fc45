#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "acdf/grid.hpp"
#include "acdf/network.hpp"

namespace acdf {

struct TrackPoint {
  TimePoint time{};
  double lat = 0.0;
  double lon = 0.0;
};

/// Rankine-type vortex: speed grows linearly to v_max at r_max and decays as
/// (r_max / r)^decay outside. Rotation is counter-clockwise; the centre moves
/// linearly between track points.
struct VortexParams {
  double v_max = 40.0;     // m/s
  double r_max_km = 30.0;  // km
  double decay = 0.5;      // outer exponent, (0, 1]
  std::vector<TrackPoint> track;
  bool add_translation = true;

  void validate() const;
};

/// Wind at one point; throws ExtrapolationError when t is outside the track.
std::array<double, 2> vortex_wind_at(const VortexParams& params, double lat, double lon, TimePoint t);
/// Tangential speed at distance r_km from the centre.
double vortex_speed(const VortexParams& params, double r_km);

WindField generate_vortex(const VortexParams& params, const GridSpec& spec,
                          const std::vector<TimePoint>& times);

/// Scales speed by clamp(1 + k_tpi * TPI / 100 m - k_rough * roughness, 0.2, 2),
/// keeping direction. This is the terrain-resolving ground truth.
WindField terrain_modulate(const WindField& field, const TerrainFeatures& features, double k_tpi,
                           double k_rough);
double terrain_speed_factor(double tpi, double roughness, double k_tpi, double k_rough);

/// Systematic forecast error applied to a truth field.
struct BiasModel {
  double gain = 1.0;
  double offset = 0.0;            // m/s along the local flow direction
  double displacement_lat = 0.0;  // degrees
  double displacement_lon = 0.0;
  double noise_sigma = 0.0;  // m/s per component

  void validate() const;
};

/// forecast(x) = gain * truth(x - d) + offset along the flow, speed floored at
/// zero, plus seeded Gaussian noise drawn per (seed, timestep). Displaced
/// samples falling outside the grid use the nearest in-domain location.
WindField apply_bias(const WindField& truth, const BiasModel& model, std::uint64_t seed);

std::vector<Station> place_stations(const GridSpec& spec, std::size_t n_stations, std::uint64_t seed);
StationSeries sample_stations(const WindField& truth_fine, const std::vector<Station>& stations);
StationSeries sample_stations(const WindField& truth_fine, std::size_t n_stations, std::uint64_t seed);

/// Random-walk polylines with roughly span_km between towers.
Network generate_network(const GridSpec& spec, int n_lines, int towers_per_line, double span_km,
                         std::uint64_t seed);

struct TerrainSynthParams {
  int hills = 14;
  double hill_height_min = 150.0;
  double hill_height_max = 700.0;
  double hill_radius_km_min = 2.0;
  double hill_radius_km_max = 7.0;
  int ridges = 8;
  double ridge_height_min = 200.0;
  double ridge_height_max = 800.0;
  double ridge_length_km_min = 10.0;
  double ridge_length_km_max = 40.0;
  double ridge_width_km_min = 1.5;
  double ridge_width_km_max = 4.0;
  double sea_fraction = 0.15;  // eastern share of the domain below the coast
  int urban_patches = 3;
  double urban_radius_km = 3.0;

  void validate() const;
};

/// Gaussian hills and ridges over a low coastal plain, with an eastern sea
/// and land cover assigned from elevation plus a few urban disks.
TerrainGrid synthesize_terrain(const GridSpec& spec, const TerrainSynthParams& params, std::uint64_t seed);

/// Static context shared by every storm over one study area.
struct Region {
  GridSpec coarse;
  GridSpec fine;
  TerrainGrid terrain;
  TerrainFeatures features;
  std::vector<Station> stations;
  Network network;
};

struct RegionParams {
  GridSpec coarse;
  GridSpec fine;
  TerrainSynthParams terrain;
  int tpi_radius_cells = 10;
  std::size_t stations = 60;
  int lines = 10;
  int towers_per_line = 20;
  double span_km = 0.4;
  std::uint64_t terrain_seed = 1;
  std::uint64_t station_seed = 2;
  std::uint64_t network_seed = 3;
};

Region build_region(const RegionParams& params);

struct EventSpec {
  std::string id;
  VortexParams vortex;
  BiasModel bias;
  std::uint64_t seed = 0;
};

struct ScenarioTiming {
  TimePoint start{};
  std::size_t hours = 30;
};

/// How the coarse and fine truths are tied together.
enum class TruthCoupling {
  kBlockMean,          // vortex on the fine grid, coarse truth = block mean of the modulated fine truth
  kModulatedUpsample,  // vortex on the coarse grid is the coarse truth, fine truth = modulated bilinear refinement
};

struct SyntheticEvent {
  std::string id;
  WindField truth_fine;       // terrain-modulated flow on the fine grid
  WindField truth_coarse;     // see TruthCoupling
  WindField forecast_coarse;  // biased truth_coarse
  StationSeries stations;     // truth_fine sampled at the region's stations
};

SyntheticEvent build_event(const Region& region, const EventSpec& spec, const ScenarioTiming& timing,
                           double k_tpi, double k_rough, TruthCoupling coupling = TruthCoupling::kBlockMean);

std::string to_string(TruthCoupling c);
TruthCoupling truth_coupling_from_string(const std::string& s);

}  // namespace acdf
