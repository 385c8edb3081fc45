#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acdf/grid.hpp"
#include "acdf/network.hpp"
#include "json.hpp"

namespace acdf {

/// Lognormal wind-speed capacity per attack angle: mu in ln(m/s).
struct FragilityTable {
  std::vector<double> angles;
  std::vector<double> mu;
  std::vector<double> sigma;

  static FragilityTable defaults();
  void validate() const;
  nlohmann::json to_json() const;
  static FragilityTable from_json(const nlohmann::json& j);
};

struct FragilityParams {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Acute angle in [0, 90] between the wind direction and a span azimuth.
double attack_angle(double wind_dir_deg, double span_azimuth_deg);

/// Linear interpolation between bracketing table angles; RangeError outside [0, 90].
FragilityParams fragility_params(const FragilityTable& table, double theta);

double standard_normal_cdf(double x);

/// Phi((ln v - mu) / sigma); zero for v = 0.
double marginal_failure_prob(double v, double theta, const FragilityTable& table = FragilityTable::defaults());

/// (ln v - mu) / sigma, -infinity for calm air.
double failure_margin(double v, double theta, const FragilityTable& table);

/// Failure given the latent resistance z: v >= exp(mu + sigma z).
bool conditional_failure(double z, double v, double theta, const FragilityTable& table = FragilityTable::defaults());

/// p_prev + (1 - p_prev) p_inst; RangeError for inputs outside [0, 1].
double survival_update(double p_prev, double p_inst);

struct TowerExposure {
  std::vector<double> speed;  // m/s
  std::vector<double> angle;  // degrees, [0, 90]

  std::size_t steps() const { return speed.size(); }
  void validate() const;
};

/// Cumulative failure probability per step from mc_samples latent
/// resistances drawn from the stream `seed`.
std::vector<double> tower_risk_mc(const TowerExposure& exposure, const FragilityTable& table,
                                  std::size_t mc_samples, std::uint64_t seed);

/// Series system of independent towers: 1 - prod(1 - p_j) per step.
std::vector<double> line_risk_independent(const std::vector<std::vector<double>>& tower_probs);

/// Series system with common-factor resistances z_j = sqrt(rho) Z + sqrt(1 - rho) e_j,
/// sampled jointly; each MC sample has its own seeded stream.
std::vector<double> line_risk_correlated(const std::vector<TowerExposure>& towers, const FragilityTable& table,
                                         double rho, std::size_t mc_samples, std::uint64_t seed);

enum class CorrelationMode { kIndependent, kCommonFactor };

struct RiskConfig {
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 7;
  int substeps_per_hour = 1;  // 6 gives 10-minute steps
  CorrelationMode mode = CorrelationMode::kIndependent;
  double rho = 0.5;
  double threshold = 0.01;

  void validate() const;
  nlohmann::json to_json() const;
};

struct RiskSeries {
  std::vector<TimePoint> times;
  double timestep_hours = 1.0;
  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;
  double threshold = 0.01;
  std::vector<std::string> tower_ids;
  std::vector<std::string> line_ids;
  std::vector<std::vector<double>> tower_probs;  // [tower][t]
  std::vector<std::vector<double>> line_probs;   // [line][t]

  double line_max(std::size_t line) const;
  /// First step whose probability exceeds the threshold.
  std::optional<std::size_t> first_exceed(std::size_t line) const;
  bool flagged(std::size_t line) const { return first_exceed(line).has_value(); }
};

/// Exposure of one tower to a wind field at its location, expanded to
/// substeps_per_hour constant sub-steps per hourly field.
TowerExposure tower_exposure(const WindField& wind, const Tower& tower, int substeps_per_hour = 1);

RiskSeries risk_forecast(const WindField& wind, const Network& network, const FragilityTable& table,
                         const RiskConfig& config);

/// Long-format CSV: kind,id,time,probability.
std::string risk_csv(const RiskSeries& series);
/// FeatureCollection of line LineStrings with max_prob, first_exceed_time and flagged.
nlohmann::json risk_geojson(const RiskSeries& series, const Network& network);

/// Six significant digits, shared by every text export.
std::string format_number(double value);

}  // namespace acdf
