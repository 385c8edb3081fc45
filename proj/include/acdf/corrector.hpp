#pragma once

#include <array>
#include <string>
#include <vector>

#include "acdf/downscaler.hpp"
#include "acdf/grid.hpp"
#include "json.hpp"

namespace acdf {

inline constexpr int kDefaultHistoryHours = 6;
inline constexpr int kDefaultHorizonHours = 12;
inline constexpr double kDefaultAlpha = 0.01;

enum CorrectorFeature : int {
  kMeanErrU = 0,
  kMeanErrV,
  kLastErrU,
  kLastErrV,
  kForecastU,
  kForecastV,
  kForecastSpeed,
  kLeadFraction,
  kSmoothErrU,
  kSmoothErrV,
};
inline constexpr int kCorrectorFeatureCount = 10;
const std::vector<std::string>& corrector_feature_names();

/// One issue time t0: forecast over [t0-H+1, t0+tau] and coarse observations
/// over the history window [t0-H+1, t0].
struct ForecastCycle {
  TimePoint issue_time{};
  int history = kDefaultHistoryHours;
  int horizon = kDefaultHorizonHours;
  WindField forecast;     // history + horizon steps
  WindField obs_history;  // history steps

  /// Throws IncompleteCycleError on missing or misaligned hours.
  void validate() const;
  std::vector<TimePoint> forecast_times() const;
};

/// Cuts the cycle issued at `issue` out of event-long hourly fields.
ForecastCycle make_cycle(const WindField& forecast, const WindField& obs, TimePoint issue,
                         int history = kDefaultHistoryHours, int horizon = kDefaultHorizonHours);

/// Issue times for which a full cycle fits inside `times`, every `spacing` hours.
std::vector<TimePoint> cycle_issue_times(const std::vector<TimePoint>& times, int history, int horizon,
                                         int spacing_hours = 1);

/// Supervision for one cycle over its forecast window.
struct CycleLabels {
  WindField obs_coarse;    // horizon steps, coarse grid
  StationSeries stations;  // horizon steps
};

CycleLabels make_labels(const WindField& obs_coarse, const StationSeries& stations, TimePoint issue,
                        int horizon = kDefaultHorizonHours);

/// psi as [lead][y][x][feature].
struct CycleFeatures {
  GridSpec spec;
  int horizon = 0;
  std::vector<double> data;

  const double* at(int lead, int y, int x) const {
    return &data[((static_cast<std::size_t>(lead) * spec.ny + y) * spec.nx + x) * kCorrectorFeatureCount];
  }
};

CycleFeatures build_features(const ForecastCycle& cycle);

struct CorrectorConfig {
  double alpha = kDefaultAlpha;
  int max_iters = 2000;
  double step_size = 1.0;
  double tolerance = 1e-8;  // relative loss improvement
  int max_halvings = 60;

  nlohmann::json to_json() const;
};

class CorrectorModel {
public:
  // weights[lead][channel][feature]
  using LeadWeights = std::array<std::array<double, kCorrectorFeatureCount>, 2>;

  CorrectorModel() = default;
  /// Trained model with all weights zero.
  static CorrectorModel zero(int horizon, double alpha = kDefaultAlpha);

  bool trained() const { return trained_; }
  int horizon() const { return static_cast<int>(weights_.size()); }
  double alpha() const { return alpha_; }
  const std::vector<LeadWeights>& weights() const { return weights_; }
  const std::vector<double>& loss_history() const { return loss_history_; }
  const std::string& downscaler_hash() const { return downscaler_hash_; }
  int iterations() const { return iterations_; }

  std::vector<double> flat_weights() const;
  void set_flat_weights(const std::vector<double>& theta);

  nlohmann::json to_json() const;
  std::string serialize() const;
  static CorrectorModel from_json(const nlohmann::json& j);

private:
  friend CorrectorModel fit_corrector(const std::vector<ForecastCycle>&, const std::vector<CycleLabels>&,
                                      const DownscalerModel&, const TerrainFeatures&, const CorrectorConfig&);
  std::vector<LeadWeights> weights_;
  double alpha_ = kDefaultAlpha;
  std::string downscaler_hash_;
  std::vector<double> loss_history_;
  int iterations_ = 0;
  bool trained_ = false;
};

/// forecast + theta(lead) . psi per channel over the forecast window.
WindField apply_correction(const CorrectorModel& model, const ForecastCycle& cycle);

struct LossReport {
  double l_grid = 0.0;
  double l_station = 0.0;
  double l_total = 0.0;
  double alpha = kDefaultAlpha;
};

double loss_grid(const WindField& corrected, const WindField& obs);
double loss_station(const WindField& downscaled, const StationSeries& obs);
LossReport loss_total(double l_grid, double l_station, double alpha = kDefaultAlpha);

/// Mean dual-objective loss over cycles as a function of the flattened
/// corrector weights, evaluated through the frozen downscaler.
class CorrectorObjective {
public:
  CorrectorObjective(const std::vector<ForecastCycle>& cycles, const std::vector<CycleLabels>& labels,
                     const DownscalerModel& frozen_ds, const TerrainFeatures& terrain, double alpha);

  int horizon() const { return horizon_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(horizon_) * kLeadParams; }

  LossReport evaluate(const std::vector<double>& theta) const;
  double value(const std::vector<double>& theta) const { return evaluate(theta).l_total; }
  /// Returns the loss and writes the gradient.
  double gradient(const std::vector<double>& theta, std::vector<double>& grad) const;
  /// Gauss-Newton curvature, one kLeadParams x kLeadParams block per lead,
  /// stored row-major and concatenated.
  double gauss_newton(const std::vector<double>& theta, std::vector<double>& grad,
                      std::vector<double>& blocks) const;

  static constexpr int kLeadParams = 2 * kCorrectorFeatureCount;

private:
  struct FineTap {
    double beta;  // station bilinear weight
    double a;     // terrain-only part of the factor
    double b;     // speed-interaction slope
    std::array<int, 4> node;
    std::array<double, 4> w;
  };
  struct CycleData {
    CycleFeatures features;
    std::vector<double> forecast;  // [lead][node][c]
    std::vector<double> obs;       // [lead][node][c]
    std::vector<double> stations;  // [lead][s][c]
  };
  double accumulate(const std::vector<double>& theta, std::vector<double>* grad, std::vector<double>* blocks,
                    LossReport* report) const;

  GridSpec coarse_;
  int horizon_ = 0;
  std::size_t nodes_ = 0;
  std::size_t station_count_ = 0;
  double alpha_ = kDefaultAlpha;
  std::vector<std::array<FineTap, 4>> taps_;
  std::vector<CycleData> cycles_;
};

/// Requires a frozen downscaler (ContractError otherwise). Starts from zero
/// weights and runs Gauss-Newton preconditioned descent with step halving.
CorrectorModel fit_corrector(const std::vector<ForecastCycle>& cycles, const std::vector<CycleLabels>& labels,
                             const DownscalerModel& frozen_ds, const TerrainFeatures& terrain,
                             const CorrectorConfig& config = {});

}  // namespace acdf
