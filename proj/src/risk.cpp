#include "acdf/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "acdf/errors.hpp"
#include "acdf/hashing.hpp"
#include "acdf/parallel.hpp"
#include "acdf/resample.hpp"

namespace acdf {

using nlohmann::json;

namespace {

// Counter-based generator: cheap to seed, so every MC sample can own a stream.
class CounterEngine {
public:
  using result_type = std::uint64_t;
  explicit CounterEngine(std::uint64_t key) : key_(key) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return mix_seed(key_, counter_++); }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Running maximum of the failure margin; a sample with latent z has failed by
// step t iff z <= running[t].
std::vector<double> running_margin(const TowerExposure& e, const FragilityTable& table) {
  std::vector<double> m(e.steps());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < e.steps(); ++t) {
    best = std::max(best, failure_margin(e.speed[t], e.angle[t], table));
    m[t] = best;
  }
  return m;
}

std::size_t first_failure(const std::vector<double>& running, double z) {
  return static_cast<std::size_t>(std::lower_bound(running.begin(), running.end(), z) - running.begin());
}

std::vector<double> cumulative_from_first(const std::vector<std::size_t>& first, std::size_t steps) {
  std::vector<std::size_t> hist(steps + 1, 0);
  for (std::size_t f : first) ++hist[std::min(f, steps)];
  std::vector<double> p(steps);
  std::size_t failed = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    failed += hist[t];
    p[t] = static_cast<double>(failed) / static_cast<double>(first.size());
  }
  return p;
}

// Six decimal places (~0.1 m) rather than six significant digits, which
// would move towers by up to a hundred metres.
double round_coordinate(double deg) { return std::round(deg * 1e6) / 1e6; }

void check_unit(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

FragilityTable FragilityTable::defaults() {
  return {{0.0, 30.0, 45.0, 60.0, 90.0}, {2.708, 2.996, 3.219, 3.401, 3.555}, {0.03, 0.03, 0.03, 0.03, 0.03}};
}

void FragilityTable::validate() const {
  if (angles.size() < 2 || mu.size() != angles.size() || sigma.size() != angles.size()) {
    throw InvalidArgumentError("fragility table needs matching angles, mu and sigma with at least two rows");
  }
  if (angles.front() != 0.0 || angles.back() != 90.0) {
    throw InvalidArgumentError("fragility table angles must span [0, 90]");
  }
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (i > 0 && !(angles[i] > angles[i - 1])) throw InvalidArgumentError("fragility angles must increase strictly");
    if (!std::isfinite(mu[i]) || !(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
      throw InvalidArgumentError("fragility mu must be finite and sigma positive");
    }
  }
}

json FragilityTable::to_json() const { return {{"angles", angles}, {"mu", mu}, {"sigma", sigma}}; }

FragilityTable FragilityTable::from_json(const json& j) {
  FragilityTable t;
  try {
    t.angles = j.at("angles").get<std::vector<double>>();
    t.mu = j.at("mu").get<std::vector<double>>();
    t.sigma = j.at("sigma").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed fragility table: ") + e.what());
  }
  t.validate();
  return t;
}

double attack_angle(double wind_dir_deg, double span_azimuth_deg) {
  const double d = std::fmod(std::abs(wind_dir_deg - span_azimuth_deg), 180.0);
  return std::min(d, 180.0 - d);
}

FragilityParams fragility_params(const FragilityTable& table, double theta) {
  if (!(theta >= 0.0 && theta <= 90.0)) throw RangeError("attack angle must lie in [0, 90]");
  const auto hi = std::lower_bound(table.angles.begin(), table.angles.end(), theta);
  const std::size_t i = static_cast<std::size_t>(hi - table.angles.begin());
  if (table.angles[i] == theta) return {table.mu[i], table.sigma[i]};
  const double w = (theta - table.angles[i - 1]) / (table.angles[i] - table.angles[i - 1]);
  return {(1.0 - w) * table.mu[i - 1] + w * table.mu[i], (1.0 - w) * table.sigma[i - 1] + w * table.sigma[i]};
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double failure_margin(double v, double theta, const FragilityTable& table) {
  if (!(v >= 0.0)) throw RangeError("wind speed must be non-negative");
  if (v == 0.0) return -std::numeric_limits<double>::infinity();
  const FragilityParams p = fragility_params(table, theta);
  return (std::log(v) - p.mu) / p.sigma;
}

double marginal_failure_prob(double v, double theta, const FragilityTable& table) {
  if (v == 0.0) return 0.0;
  return standard_normal_cdf(failure_margin(v, theta, table));
}

// v >= exp(mu + sigma z) evaluated in the log domain.
bool conditional_failure(double z, double v, double theta, const FragilityTable& table) {
  if (v == 0.0) return false;
  return z <= failure_margin(v, theta, table);
}

double survival_update(double p_prev, double p_inst) {
  check_unit(p_prev, "previous probability");
  check_unit(p_inst, "instantaneous probability");
  return p_prev + (1.0 - p_prev) * p_inst;
}

void TowerExposure::validate() const {
  if (speed.size() != angle.size()) throw ShapeError("exposure speed and angle series differ in length");
  for (std::size_t t = 0; t < speed.size(); ++t) {
    if (!(speed[t] >= 0.0) || !std::isfinite(speed[t])) throw RangeError("exposure speeds must be finite and >= 0");
    if (!(angle[t] >= 0.0 && angle[t] <= 90.0)) throw RangeError("exposure angles must lie in [0, 90]");
  }
}

std::vector<double> tower_risk_mc(const TowerExposure& exposure, const FragilityTable& table,
                                  std::size_t mc_samples, std::uint64_t seed) {
  if (mc_samples < 1) throw InvalidArgumentError("mc_samples must be >= 1");
  exposure.validate();
  const std::vector<double> running = running_margin(exposure, table);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::size_t> first(mc_samples);
  for (std::size_t i = 0; i < mc_samples; ++i) first[i] = first_failure(running, normal(rng));
  return cumulative_from_first(first, exposure.steps());
}

std::vector<double> line_risk_independent(const std::vector<std::vector<double>>& tower_probs) {
  if (tower_probs.empty()) throw InvalidArgumentError("a line needs at least one tower");
  const std::size_t steps = tower_probs.front().size();
  std::vector<double> survive(steps, 1.0), largest(steps, 0.0), sum(steps, 0.0);
  for (const auto& p : tower_probs) {
    if (p.size() != steps) throw ShapeError("tower probability series have mismatched time axes");
    for (std::size_t t = 0; t < steps; ++t) {
      check_unit(p[t], "tower probability");
      survive[t] *= 1.0 - p[t];
      largest[t] = std::max(largest[t], p[t]);
      sum[t] += p[t];
    }
  }
  // Clamping to the series-system bounds only absorbs rounding in 1 - prod.
  std::vector<double> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    out[t] = std::clamp(1.0 - survive[t], largest[t], std::min(1.0, sum[t]));
  }
  return out;
}

std::vector<double> line_risk_correlated(const std::vector<TowerExposure>& towers, const FragilityTable& table,
                                         double rho, std::size_t mc_samples, std::uint64_t seed) {
  if (towers.empty()) throw InvalidArgumentError("a line needs at least one tower");
  if (!(rho >= 0.0 && rho <= 1.0)) throw RangeError("correlation rho must lie in [0, 1]");
  if (mc_samples < 1) throw InvalidArgumentError("mc_samples must be >= 1");
  const std::size_t steps = towers.front().steps();
  std::vector<std::vector<double>> running;
  for (const auto& e : towers) {
    e.validate();
    if (e.steps() != steps) throw ShapeError("tower exposures have mismatched time axes");
    running.push_back(running_margin(e, table));
  }
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  std::vector<std::size_t> first(mc_samples);
  parallel_for(mc_samples, [&](std::size_t s) {
    CounterEngine rng(mix_seed(seed, s));
    std::normal_distribution<double> normal;
    const double common = normal(rng);
    std::size_t f = steps;
    for (const auto& r : running) f = std::min(f, first_failure(r, a * common + b * normal(rng)));
    first[s] = f;
  });
  return cumulative_from_first(first, steps);
}

void RiskConfig::validate() const {
  if (mc_samples < 1) throw ConfigError("risk.mc_samples must be >= 1");
  if (substeps_per_hour < 1 || substeps_per_hour > 60 || 3600 % substeps_per_hour != 0) {
    throw ConfigError("risk.substeps_per_hour must divide an hour into whole minutes");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("risk.rho must lie in [0, 1]");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("risk.threshold must lie in [0, 1]");
}

json RiskConfig::to_json() const {
  return {{"mc_samples", mc_samples},
          {"seed", seed},
          {"substeps_per_hour", substeps_per_hour},
          {"correlation", mode == CorrelationMode::kIndependent ? "independent" : "common_factor"},
          {"rho", rho},
          {"threshold", threshold}};
}

double RiskSeries::line_max(std::size_t line) const {
  const auto& p = line_probs.at(line);
  return p.empty() ? 0.0 : *std::max_element(p.begin(), p.end());
}

std::optional<std::size_t> RiskSeries::first_exceed(std::size_t line) const {
  const auto& p = line_probs.at(line);
  for (std::size_t t = 0; t < p.size(); ++t)
    if (p[t] > threshold) return t;
  return std::nullopt;
}

TowerExposure tower_exposure(const WindField& wind, const Tower& tower, int substeps_per_hour) {
  TowerExposure e;
  const BilinearStencil s = bilinear_stencil(wind.spec, tower.lat, tower.lon);
  for (std::size_t t = 0; t < wind.time_count(); ++t) {
    const double u = s.apply([&](int y, int x) { return wind.at(t, y, x, 0); });
    const double v = s.apply([&](int y, int x) { return wind.at(t, y, x, 1); });
    const double speed = wind_speed(u, v);
    const double angle = attack_angle(wind_direction_deg(u, v), tower.span_azimuth);
    for (int k = 0; k < substeps_per_hour; ++k) {
      e.speed.push_back(speed);
      e.angle.push_back(angle);
    }
  }
  return e;
}

RiskSeries risk_forecast(const WindField& wind, const Network& network, const FragilityTable& table,
                         const RiskConfig& config) {
  config.validate();
  table.validate();
  network.validate();
  std::vector<std::string> outside;
  for (const Tower& t : network.towers) {
    if (!wind.spec.contains(t.lat, t.lon)) outside.push_back(t.id);
  }
  if (!outside.empty()) {
    std::string list;
    for (std::size_t i = 0; i < outside.size() && i < 10; ++i) list += (i ? ", " : "") + outside[i];
    if (outside.size() > 10) list += ", ...";
    throw OutOfDomainError(std::to_string(outside.size()) + " tower(s) outside the wind field: " + list);
  }

  RiskSeries r;
  const int k = config.substeps_per_hour;
  const auto step = std::chrono::seconds(3600 / k);
  for (TimePoint hour : wind.times)
    for (int j = 0; j < k; ++j) r.times.push_back(hour - (k - 1 - j) * step);
  r.timestep_hours = 1.0 / k;
  r.mc_samples = config.mc_samples;
  r.seed = config.seed;
  r.threshold = config.threshold;

  const std::size_t n = network.towers.size();
  std::vector<TowerExposure> exposures(n);
  r.tower_ids.resize(n);
  r.tower_probs.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const Tower& t = network.towers[i];
    exposures[i] = tower_exposure(wind, t, k);
    r.tower_ids[i] = t.id;
    r.tower_probs[i] = tower_risk_mc(exposures[i], table, config.mc_samples, mix_seed(config.seed, fnv1a64(t.id)));
  });

  for (const Line& line : network.lines) {
    r.line_ids.push_back(line.id);
    if (config.mode == CorrelationMode::kIndependent) {
      std::vector<std::vector<double>> probs;
      for (std::size_t i : line.towers) probs.push_back(r.tower_probs[i]);
      r.line_probs.push_back(line_risk_independent(probs));
    } else {
      std::vector<TowerExposure> ex;
      for (std::size_t i : line.towers) ex.push_back(exposures[i]);
      r.line_probs.push_back(line_risk_correlated(ex, table, config.rho, config.mc_samples,
                                                  mix_seed(config.seed, fnv1a64("line/" + line.id))));
    }
  }
  return r;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string risk_csv(const RiskSeries& series) {
  std::ostringstream out;
  out << "kind,id,time,probability\n";
  auto emit = [&](const char* kind, const std::vector<std::string>& ids, const std::vector<std::vector<double>>& p) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t t = 0; t < series.times.size(); ++t)
        out << kind << ',' << ids[i] << ',' << format_utc(series.times[t]) << ',' << format_number(p[i][t]) << '\n';
  };
  emit("tower", series.tower_ids, series.tower_probs);
  emit("line", series.line_ids, series.line_probs);
  return out.str();
}

json risk_geojson(const RiskSeries& series, const Network& network) {
  json features = json::array();
  for (std::size_t l = 0; l < network.lines.size(); ++l) {
    const Line& line = network.lines[l];
    json coords = json::array();
    for (std::size_t i : line.towers) {
      coords.push_back({round_coordinate(network.towers[i].lon), round_coordinate(network.towers[i].lat)});
    }
    const auto first = series.first_exceed(l);
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
                        {"properties",
                         {{"id", line.id},
                          {"max_prob", std::stod(format_number(series.line_max(l)))},
                          {"first_exceed_time", first ? json(format_utc(series.times[*first])) : json(nullptr)},
                          {"flagged", first.has_value()}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace acdf
