#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acdf/grid.hpp"
#include "acdf/terrain.hpp"
#include "json.hpp"

namespace acdf {

inline constexpr double kCalmSpeed = 0.5;        // m/s, direction undefined below
inline constexpr double kHighWindSpeed = 20.0;  // m/s

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over samples
};

struct SpeedErrors {
  MeanStd mae;  // |pred - obs|
  MeanStd me;   // pred - obs
  std::size_t count = 0;
};

struct DirectionErrors {
  MeanStd mae;
  std::size_t count = 0;  // non-calm samples
};

SpeedErrors speed_errors(const std::vector<double>& pred_speed, const std::vector<double>& obs_speed);
/// Scalar-speed errors of station-aligned vector series.
SpeedErrors speed_errors(const StationSeries& pred, const StationSeries& obs);

/// Circular error in [0, 180] between two directions in degrees.
double direction_error(double a_deg, double b_deg);
/// Over samples whose observed speed is at least kCalmSpeed; EmptySetError if none.
DirectionErrors direction_mae(const std::vector<std::array<double, 2>>& pred,
                              const std::vector<std::array<double, 2>>& obs);
DirectionErrors direction_mae(const StationSeries& pred, const StationSeries& obs);

struct EvalSample {
  double pred_u = 0.0;
  double pred_v = 0.0;
  double obs_u = 0.0;
  double obs_v = 0.0;
  TerrainClass terrain = TerrainClass::kFlat;
};

/// Pools every (station, time) pair; station_class[s] labels station s.
std::vector<EvalSample> collect_samples(const StationSeries& pred, const StationSeries& obs,
                                        const std::vector<TerrainClass>& station_class);

struct WindBin {
  std::string name;
  double min_obs_speed = 0.0;  // samples with obs speed strictly above, or all when 0
};
std::vector<WindBin> default_wind_bins(double high_wind = kHighWindSpeed);

struct MetricsReport {
  std::size_t sample_count = 0;
  MeanStd mae_spd;
  MeanStd me_spd;
  std::optional<MeanStd> mae_dir;  // absent when every sample is calm
  std::size_t dir_count = 0;
  std::map<std::string, MetricsReport> terrain;  // "valley", "flat", "ridge"
  std::map<std::string, MetricsReport> wind;     // by bin name

  nlohmann::json to_json() const;
};

MetricsReport compute_metrics(const std::vector<EvalSample>& samples);
MetricsReport stratify(const std::vector<EvalSample>& samples, const std::vector<WindBin>& bins = default_wind_bins());

/// 100 (mae_a - mae_b) / mae_a.
double improvement(double mae_a, double mae_b);
double improvement(const MetricsReport& a, const MetricsReport& b);

struct LosoFold {
  std::string held_out;
  std::vector<std::string> train_events;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
};

std::vector<LosoFold> make_loso_folds(const std::vector<std::string>& event_ids, double val_fraction,
                                      std::uint64_t seed);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Partitions sample indices by event id: held-out samples go to test, the rest
/// are shuffled with the fold seed and split at val_fraction. Throws
/// ContractError if a held-out sample would reach train or validation.
FoldSplit split_samples(const LosoFold& fold, const std::vector<std::string>& sample_events);

struct TableRow {
  std::string event;
  std::string model;
  MetricsReport report;
  std::optional<double> improvement;  // percent vs the event's baseline row
};

/// Aligned-column text table, one row per event x model.
std::string render_table(const std::vector<TableRow>& rows);

/// Density histograms of wind speed, one column per named series.
std::string histogram_csv(const std::vector<std::string>& names, const std::vector<std::vector<double>>& speeds,
                          double bin_width = 1.0, double max_speed = 60.0);

}  // namespace acdf
