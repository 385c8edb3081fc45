#include "acdf/corrector.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "acdf/errors.hpp"
#include "acdf/hashing.hpp"
#include "acdf/parallel.hpp"
#include "acdf/resample.hpp"

namespace acdf {

using nlohmann::json;

namespace {

constexpr int kF = kCorrectorFeatureCount;
constexpr int kModelVersion = 1;

std::size_t find_time(const std::vector<TimePoint>& times, TimePoint t, const char* what) {
  const auto it = std::find(times.begin(), times.end(), t);
  if (it == times.end()) throw IncompleteCycleError(std::string(what) + " has no data at " + format_utc(t));
  return static_cast<std::size_t>(it - times.begin());
}

void check_window(const std::vector<TimePoint>& times, TimePoint first, std::size_t count, const char* what) {
  if (times.size() != count) {
    throw IncompleteCycleError(std::string(what) + " holds " + std::to_string(times.size()) + " hours, expected " +
                               std::to_string(count));
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (times[i] != first + static_cast<long>(i) * kHour) {
      throw IncompleteCycleError(std::string(what) + " is missing hour " + format_utc(first + static_cast<long>(i) * kHour));
    }
  }
}

}  // namespace

const std::vector<std::string>& corrector_feature_names() {
  static const std::vector<std::string> names{"mean_err_u",  "mean_err_v",  "last_err_u",    "last_err_v",
                                              "forecast_u",  "forecast_v",  "forecast_speed", "lead_fraction",
                                              "smooth_err_u", "smooth_err_v"};
  return names;
}

void ForecastCycle::validate() const {
  if (history < 1 || horizon < 1) throw InvalidArgumentError("cycle history and horizon must be >= 1");
  const TimePoint first = issue_time - static_cast<long>(history - 1) * kHour;
  check_window(forecast.times, first, static_cast<std::size_t>(history + horizon), "cycle forecast");
  check_window(obs_history.times, first, static_cast<std::size_t>(history), "cycle observation history");
  if (!forecast.spec.same_geometry(obs_history.spec)) throw AlignmentError("cycle forecast and observations differ in grid");
}

std::vector<TimePoint> ForecastCycle::forecast_times() const {
  return hourly_times(issue_time + kHour, static_cast<std::size_t>(horizon));
}

ForecastCycle make_cycle(const WindField& forecast, const WindField& obs, TimePoint issue, int history,
                         int horizon) {
  if (history < 1 || horizon < 1) throw InvalidArgumentError("cycle history and horizon must be >= 1");
  const TimePoint first = issue - static_cast<long>(history - 1) * kHour;
  const std::size_t f0 = find_time(forecast.times, first, "forecast");
  const std::size_t o0 = find_time(obs.times, first, "observations");
  if (f0 + history + horizon > forecast.times.size()) {
    throw IncompleteCycleError("forecast ends before " + format_utc(issue + static_cast<long>(horizon) * kHour));
  }
  if (o0 + history > obs.times.size()) throw IncompleteCycleError("observations end before " + format_utc(issue));
  ForecastCycle c;
  c.issue_time = issue;
  c.history = history;
  c.horizon = horizon;
  c.forecast = forecast.time_window(f0, static_cast<std::size_t>(history + horizon));
  c.obs_history = obs.time_window(o0, static_cast<std::size_t>(history));
  c.validate();
  return c;
}

std::vector<TimePoint> cycle_issue_times(const std::vector<TimePoint>& times, int history, int horizon,
                                         int spacing_hours) {
  if (spacing_hours < 1) throw InvalidArgumentError("cycle spacing must be >= 1 hour");
  std::vector<TimePoint> out;
  if (!is_hourly(times)) throw InvalidArgumentError("cycle source times must be hourly");
  const long n = static_cast<long>(times.size());
  for (long i = history - 1; i + horizon < n; i += spacing_hours) out.push_back(times[static_cast<std::size_t>(i)]);
  return out;
}

CycleLabels make_labels(const WindField& obs_coarse, const StationSeries& stations, TimePoint issue, int horizon) {
  const std::size_t g0 = find_time(obs_coarse.times, issue + kHour, "coarse observations");
  const std::size_t s0 = find_time(stations.times, issue + kHour, "station observations");
  CycleLabels l;
  try {
    l.obs_coarse = obs_coarse.time_window(g0, static_cast<std::size_t>(horizon));
    l.stations = stations.time_window(s0, static_cast<std::size_t>(horizon));
  } catch (const ShapeError&) {
    throw IncompleteCycleError("observations end before " + format_utc(issue + static_cast<long>(horizon) * kHour));
  }
  return l;
}

CycleFeatures build_features(const ForecastCycle& cycle) {
  cycle.validate();
  const GridSpec& g = cycle.forecast.spec;
  const std::size_t n = g.node_count();
  const int h = cycle.history;

  std::vector<double> mean_err(n * 2, 0.0), last_err(n * 2), smooth(n * 2);
  for (int t = 0; t < h; ++t) {
    for (std::size_t k = 0; k < n * 2; ++k) {
      const double e = cycle.obs_history.data[t * n * 2 + k] - cycle.forecast.data[t * n * 2 + k];
      mean_err[k] += e;
      if (t == h - 1) last_err[k] = e;
    }
  }
  for (double& e : mean_err) e /= h;
  for (int y = 0; y < g.ny; ++y) {
    for (int x = 0; x < g.nx; ++x) {
      double su = 0.0, sv = 0.0;
      int count = 0;
      for (int yy = std::max(0, y - 1); yy <= std::min(g.ny - 1, y + 1); ++yy) {
        for (int xx = std::max(0, x - 1); xx <= std::min(g.nx - 1, x + 1); ++xx) {
          const std::size_t k = static_cast<std::size_t>(yy) * g.nx + xx;
          su += mean_err[k * 2];
          sv += mean_err[k * 2 + 1];
          ++count;
        }
      }
      const std::size_t k = static_cast<std::size_t>(y) * g.nx + x;
      smooth[k * 2] = su / count;
      smooth[k * 2 + 1] = sv / count;
    }
  }

  CycleFeatures out;
  out.spec = g;
  out.horizon = cycle.horizon;
  out.data.resize(static_cast<std::size_t>(cycle.horizon) * n * kF);
  for (int lead = 0; lead < cycle.horizon; ++lead) {
    const double* fc = &cycle.forecast.data[static_cast<std::size_t>(h + lead) * n * 2];
    for (std::size_t k = 0; k < n; ++k) {
      double* psi = &out.data[(static_cast<std::size_t>(lead) * n + k) * kF];
      psi[kMeanErrU] = mean_err[k * 2];
      psi[kMeanErrV] = mean_err[k * 2 + 1];
      psi[kLastErrU] = last_err[k * 2];
      psi[kLastErrV] = last_err[k * 2 + 1];
      psi[kForecastU] = fc[k * 2];
      psi[kForecastV] = fc[k * 2 + 1];
      psi[kForecastSpeed] = std::hypot(fc[k * 2], fc[k * 2 + 1]);
      psi[kLeadFraction] = static_cast<double>(lead + 1) / cycle.horizon;
      psi[kSmoothErrU] = smooth[k * 2];
      psi[kSmoothErrV] = smooth[k * 2 + 1];
    }
  }
  return out;
}

json CorrectorConfig::to_json() const {
  return {{"alpha", alpha},
          {"max_iters", max_iters},
          {"step_size", step_size},
          {"tolerance", tolerance},
          {"max_halvings", max_halvings}};
}

CorrectorModel CorrectorModel::zero(int horizon, double alpha) {
  if (horizon < 1) throw InvalidArgumentError("corrector horizon must be >= 1");
  CorrectorModel m;
  m.weights_.assign(static_cast<std::size_t>(horizon), LeadWeights{});
  m.alpha_ = alpha;
  m.trained_ = true;
  return m;
}

std::vector<double> CorrectorModel::flat_weights() const {
  std::vector<double> theta;
  theta.reserve(weights_.size() * 2 * kF);
  for (const auto& lead : weights_)
    for (const auto& ch : lead) theta.insert(theta.end(), ch.begin(), ch.end());
  return theta;
}

void CorrectorModel::set_flat_weights(const std::vector<double>& theta) {
  if (theta.size() != weights_.size() * 2 * kF) throw ShapeError("corrector weight vector has the wrong length");
  std::size_t i = 0;
  for (auto& lead : weights_)
    for (auto& ch : lead)
      for (double& w : ch) {
        if (!std::isfinite(theta[i])) throw InvalidArgumentError("corrector weights must be finite");
        w = theta[i++];
      }
}

json CorrectorModel::to_json() const {
  json leads = json::array();
  for (const auto& lead : weights_) leads.push_back({{"u", lead[0]}, {"v", lead[1]}});
  return {{"version", kModelVersion},
          {"tau", horizon()},
          {"feature_names", corrector_feature_names()},
          {"weights", leads},
          {"alpha", alpha_},
          {"downscaler_hash", downscaler_hash_},
          {"iterations", iterations_},
          {"loss_trajectory", loss_history_}};
}

std::string CorrectorModel::serialize() const { return to_json().dump(2) + "\n"; }

CorrectorModel CorrectorModel::from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion) throw FormatError("unsupported corrector model version");
    if (j.at("feature_names").get<std::vector<std::string>>() != corrector_feature_names()) {
      throw FormatError("corrector feature layout does not match this build");
    }
    CorrectorModel m = zero(j.at("tau").get<int>(), j.at("alpha").get<double>());
    const json& leads = j.at("weights");
    if (leads.size() != m.weights_.size()) throw FormatError("corrector weights do not cover every lead time");
    std::vector<double> theta;
    for (const json& lead : leads) {
      for (const char* ch : {"u", "v"}) {
        const auto w = lead.at(ch).get<std::vector<double>>();
        if (w.size() != kF) throw FormatError("corrector weight vector has the wrong length");
        theta.insert(theta.end(), w.begin(), w.end());
      }
    }
    m.set_flat_weights(theta);
    m.downscaler_hash_ = j.at("downscaler_hash").get<std::string>();
    m.iterations_ = j.value("iterations", 0);
    m.loss_history_ = j.at("loss_trajectory").get<std::vector<double>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed corrector model: ") + e.what());
  } catch (const InvalidArgumentError& e) {
    throw FormatError(std::string("malformed corrector model: ") + e.what());
  }
}

WindField apply_correction(const CorrectorModel& model, const ForecastCycle& cycle) {
  if (!model.trained()) throw NotTrainedError("corrector model has not been fitted");
  if (model.horizon() != cycle.horizon) {
    throw ShapeError("corrector horizon " + std::to_string(model.horizon()) + " does not match cycle horizon " +
                     std::to_string(cycle.horizon));
  }
  const CycleFeatures psi = build_features(cycle);
  const std::size_t n = cycle.forecast.spec.node_count();
  WindField out(cycle.forecast.spec, cycle.forecast_times());
  for (int lead = 0; lead < cycle.horizon; ++lead) {
    const auto& w = model.weights()[static_cast<std::size_t>(lead)];
    const double* fc = &cycle.forecast.data[static_cast<std::size_t>(cycle.history + lead) * n * 2];
    double* dst = &out.data[static_cast<std::size_t>(lead) * n * 2];
    for (std::size_t k = 0; k < n; ++k) {
      const double* p = &psi.data[(static_cast<std::size_t>(lead) * n + k) * kF];
      for (int c = 0; c < 2; ++c) {
        double d = 0.0;
        for (int f = 0; f < kF; ++f) d += w[c][f] * p[f];
        dst[k * 2 + c] = fc[k * 2 + c] + d;
      }
    }
  }
  return out;
}

double loss_grid(const WindField& corrected, const WindField& obs) {
  if (!corrected.spec.same_geometry(obs.spec) || corrected.times.size() != obs.times.size()) {
    throw ShapeError("loss_grid inputs differ in shape");
  }
  if (corrected.data.empty()) throw ShapeError("loss_grid inputs are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < corrected.data.size(); ++i) {
    const double e = corrected.data[i] - obs.data[i];
    sum += e * e;
  }
  return sum / static_cast<double>(corrected.times.size() * corrected.spec.node_count());
}

double loss_station(const WindField& downscaled, const StationSeries& obs) {
  if (downscaled.times.size() != obs.times.size()) throw ShapeError("loss_station time axes differ in length");
  if (obs.stations.empty() || obs.times.empty()) throw ShapeError("loss_station needs at least one station and time");
  double sum = 0.0;
  for (std::size_t s = 0; s < obs.stations.size(); ++s) {
    const Station& st = obs.stations[s];
    const BilinearStencil sten = bilinear_stencil(downscaled.spec, st.lat, st.lon);
    for (std::size_t t = 0; t < obs.times.size(); ++t) {
      for (int c = 0; c < 2; ++c) {
        const double e = sten.apply([&](int y, int x) { return downscaled.at(t, y, x, c); }) - obs.at(t, s, c);
        sum += e * e;
      }
    }
  }
  return sum / static_cast<double>(obs.times.size() * obs.stations.size());
}

LossReport loss_total(double l_grid, double l_station, double alpha) {
  if (!(l_grid >= 0.0) || !(l_station >= 0.0) || !(alpha >= 0.0)) {
    throw InvalidArgumentError("loss components and alpha must be non-negative");
  }
  return {l_grid, l_station, l_grid + alpha * l_station, alpha};
}

CorrectorObjective::CorrectorObjective(const std::vector<ForecastCycle>& cycles,
                                       const std::vector<CycleLabels>& labels, const DownscalerModel& frozen_ds,
                                       const TerrainFeatures& terrain, double alpha)
    : alpha_(alpha) {
  if (!frozen_ds.frozen()) throw ContractError("corrector training requires a frozen downscaler");
  if (cycles.empty()) throw InvalidArgumentError("corrector training needs at least one cycle");
  if (cycles.size() != labels.size()) throw ShapeError("every cycle needs one label set");
  if (!(alpha >= 0.0)) throw InvalidArgumentError("alpha must be non-negative");

  coarse_ = cycles.front().forecast.spec;
  horizon_ = cycles.front().horizon;
  nodes_ = coarse_.node_count();
  const int ratio = refinement_ratio(coarse_, terrain.spec);
  const std::vector<Station>& stations = labels.front().stations.stations;
  station_count_ = stations.size();
  if (station_count_ == 0) throw InvalidArgumentError("corrector training needs at least one station");

  const auto& theta2 = frozen_ds.weights();
  for (const Station& st : stations) {
    const BilinearStencil fs = bilinear_stencil(terrain.spec, st.lat, st.lon);
    std::array<FineTap, 4> taps;
    const int dx[4] = {0, 1, 0, 1}, dy[4] = {0, 0, 1, 1};
    const double beta[4] = {(1 - fs.wx) * (1 - fs.wy), fs.wx * (1 - fs.wy), (1 - fs.wx) * fs.wy, fs.wx * fs.wy};
    for (int m = 0; m < 4; ++m) {
      const int fx = std::min(fs.x0 + dx[m], terrain.spec.nx - 1);
      const int fy = std::min(fs.y0 + dy[m], terrain.spec.ny - 1);
      FineTap& tap = taps[static_cast<std::size_t>(m)];
      tap.beta = beta[m];
      const double* phi = &terrain.data[terrain.index(fy, fx, 0)];
      tap.a = 0.0;
      tap.b = 0.0;
      for (int f = 0; f < kTerrainFeatureCount; ++f) {
        tap.a += theta2[static_cast<std::size_t>(f)] * phi[f];
        tap.b += theta2[static_cast<std::size_t>(kTerrainFeatureCount + f)] * phi[f] / kInteractionSpeedScale;
      }
      const BilinearStencil cs = upsample_stencil(coarse_, ratio, fx, fy);
      const int cdx[4] = {0, 1, 0, 1}, cdy[4] = {0, 0, 1, 1};
      const double cw[4] = {(1 - cs.wx) * (1 - cs.wy), cs.wx * (1 - cs.wy), (1 - cs.wx) * cs.wy, cs.wx * cs.wy};
      for (int j = 0; j < 4; ++j) {
        tap.node[static_cast<std::size_t>(j)] = (cs.y0 + cdy[j]) * coarse_.nx + cs.x0 + cdx[j];
        tap.w[static_cast<std::size_t>(j)] = cw[j];
      }
    }
    taps_.push_back(taps);
  }

  cycles_.resize(cycles.size());
  parallel_for(cycles.size(), [&](std::size_t i) {
    const ForecastCycle& c = cycles[i];
    const CycleLabels& l = labels[i];
    if (!c.forecast.spec.same_geometry(coarse_) || c.horizon != horizon_) {
      throw ShapeError("all training cycles must share grid and horizon");
    }
    if (!l.obs_coarse.spec.same_geometry(coarse_) || l.obs_coarse.times != c.forecast_times() ||
        l.stations.times != c.forecast_times()) {
      throw AlignmentError("labels for cycle " + format_utc(c.issue_time) + " do not cover its forecast window");
    }
    if (l.stations.stations.size() != station_count_) throw ShapeError("every cycle must use the same stations");
    for (std::size_t s = 0; s < station_count_; ++s) {
      if (l.stations.stations[s].id != stations[s].id) throw ShapeError("every cycle must use the same stations");
    }
    CycleData& d = cycles_[i];
    d.features = build_features(c);
    const std::size_t lead_block = nodes_ * 2;
    d.forecast.assign(c.forecast.data.begin() + static_cast<long>(c.history * lead_block), c.forecast.data.end());
    d.obs = l.obs_coarse.data;
    d.stations = l.stations.data;
  });
}

LossReport CorrectorObjective::evaluate(const std::vector<double>& theta) const {
  LossReport r;
  accumulate(theta, nullptr, nullptr, &r);
  return r;
}

double CorrectorObjective::gradient(const std::vector<double>& theta, std::vector<double>& grad) const {
  return accumulate(theta, &grad, nullptr, nullptr);
}

double CorrectorObjective::gauss_newton(const std::vector<double>& theta, std::vector<double>& grad,
                                        std::vector<double>& blocks) const {
  return accumulate(theta, &grad, &blocks, nullptr);
}

double CorrectorObjective::accumulate(const std::vector<double>& theta, std::vector<double>* grad,
                                      std::vector<double>* blocks, LossReport* report) const {
  constexpr int P = kLeadParams;
  if (theta.size() != parameter_count()) throw ShapeError("corrector parameter vector has the wrong length");
  const double n_cycles = static_cast<double>(cycles_.size());
  const double cg = 1.0 / (horizon_ * static_cast<double>(nodes_) * n_cycles);
  const double cst = 1.0 / (horizon_ * static_cast<double>(station_count_) * n_cycles);
  const double cs = alpha_ * cst;

  struct Partial {
    double grid = 0.0;
    double station = 0.0;
    std::vector<double> grad;
    std::vector<double> blocks;
  };
  std::vector<Partial> parts(cycles_.size());

  parallel_for(cycles_.size(), [&](std::size_t ci) {
    const CycleData& d = cycles_[ci];
    Partial& part = parts[ci];
    if (grad) part.grad.assign(parameter_count(), 0.0);
    if (blocks) part.blocks.assign(static_cast<std::size_t>(horizon_) * P * P, 0.0);
    std::vector<double> corrected(nodes_ * 2), g_x(nodes_ * 2);

    for (int lead = 0; lead < horizon_; ++lead) {
      const double* th = &theta[static_cast<std::size_t>(lead) * P];
      const std::size_t off = static_cast<std::size_t>(lead) * nodes_ * 2;
      const double* psi_lead = d.features.at(lead, 0, 0);
      for (std::size_t k = 0; k < nodes_; ++k) {
        const double* psi = psi_lead + k * kF;
        for (int c = 0; c < 2; ++c) {
          double v = d.forecast[off + k * 2 + c];
          for (int f = 0; f < kF; ++f) v += th[c * kF + f] * psi[f];
          corrected[k * 2 + c] = v;
          const double e = v - d.obs[off + k * 2 + c];
          part.grid += e * e;
          g_x[k * 2 + c] = 2.0 * cg * e;
        }
      }

      Eigen::Map<Eigen::Matrix<double, P, P, Eigen::RowMajor>> hess(
          blocks ? &part.blocks[static_cast<std::size_t>(lead) * P * P] : nullptr);
      if (blocks) {
        Eigen::Matrix<double, kF, kF> gram = Eigen::Matrix<double, kF, kF>::Zero();
        for (std::size_t k = 0; k < nodes_; ++k) {
          Eigen::Map<const Eigen::Matrix<double, kF, 1>> psi(psi_lead + k * kF);
          gram.noalias() += psi * psi.transpose();
        }
        hess.block<kF, kF>(0, 0) += 2.0 * cg * gram;
        hess.block<kF, kF>(kF, kF) += 2.0 * cg * gram;
      }

      for (std::size_t s = 0; s < station_count_; ++s) {
        const auto& taps = taps_[s];
        double y[2] = {0.0, 0.0};
        double jac[4][2][2];
        for (int m = 0; m < 4; ++m) {
          const FineTap& tap = taps[static_cast<std::size_t>(m)];
          double x[2] = {0.0, 0.0};
          for (int j = 0; j < 4; ++j) {
            const std::size_t node = static_cast<std::size_t>(tap.node[static_cast<std::size_t>(j)]);
            x[0] += tap.w[static_cast<std::size_t>(j)] * corrected[node * 2];
            x[1] += tap.w[static_cast<std::size_t>(j)] * corrected[node * 2 + 1];
          }
          const double speed = std::hypot(x[0], x[1]);
          const double g = 1.0 + tap.a + tap.b * speed;
          y[0] += tap.beta * g * x[0];
          y[1] += tap.beta * g * x[1];
          const double k = speed > 0.0 ? tap.b / speed : 0.0;
          jac[m][0][0] = g + k * x[0] * x[0];
          jac[m][0][1] = k * x[0] * x[1];
          jac[m][1][0] = jac[m][0][1];
          jac[m][1][1] = g + k * x[1] * x[1];
        }
        const double* obs = &d.stations[(static_cast<std::size_t>(lead) * station_count_ + s) * 2];
        const double r[2] = {y[0] - obs[0], y[1] - obs[1]};
        part.station += r[0] * r[0] + r[1] * r[1];
        if (!grad) continue;
        for (int m = 0; m < 4; ++m) {
          const FineTap& tap = taps[static_cast<std::size_t>(m)];
          const double gx0 = 2.0 * cs * tap.beta * (jac[m][0][0] * r[0] + jac[m][1][0] * r[1]);
          const double gx1 = 2.0 * cs * tap.beta * (jac[m][0][1] * r[0] + jac[m][1][1] * r[1]);
          for (int j = 0; j < 4; ++j) {
            const std::size_t node = static_cast<std::size_t>(tap.node[static_cast<std::size_t>(j)]);
            g_x[node * 2] += tap.w[static_cast<std::size_t>(j)] * gx0;
            g_x[node * 2 + 1] += tap.w[static_cast<std::size_t>(j)] * gx1;
          }
        }
        if (!blocks) continue;
        Eigen::Matrix<double, 2, P> dr = Eigen::Matrix<double, 2, P>::Zero();
        for (int m = 0; m < 4; ++m) {
          const FineTap& tap = taps[static_cast<std::size_t>(m)];
          Eigen::Matrix<double, kF, 1> psi_up = Eigen::Matrix<double, kF, 1>::Zero();
          for (int j = 0; j < 4; ++j) {
            psi_up += tap.w[static_cast<std::size_t>(j)] *
                      Eigen::Map<const Eigen::Matrix<double, kF, 1>>(
                          psi_lead + static_cast<std::size_t>(tap.node[static_cast<std::size_t>(j)]) * kF);
          }
          for (int i = 0; i < 2; ++i)
            for (int c = 0; c < 2; ++c)
              dr.block<1, kF>(i, c * kF) += tap.beta * jac[m][i][c] * psi_up.transpose();
        }
        hess.noalias() += 2.0 * cs * dr.transpose() * dr;
      }

      if (grad) {
        double* gl = &part.grad[static_cast<std::size_t>(lead) * P];
        for (std::size_t k = 0; k < nodes_; ++k) {
          const double* psi = psi_lead + k * kF;
          for (int c = 0; c < 2; ++c) {
            const double gk = g_x[k * 2 + c];
            if (gk == 0.0) continue;
            for (int f = 0; f < kF; ++f) gl[c * kF + f] += gk * psi[f];
          }
        }
      }
    }
  });

  double grid = 0.0, station = 0.0;
  if (grad) grad->assign(parameter_count(), 0.0);
  if (blocks) blocks->assign(static_cast<std::size_t>(horizon_) * P * P, 0.0);
  for (const Partial& p : parts) {
    grid += p.grid;
    station += p.station;
    if (grad)
      for (std::size_t i = 0; i < p.grad.size(); ++i) (*grad)[i] += p.grad[i];
    if (blocks)
      for (std::size_t i = 0; i < p.blocks.size(); ++i) (*blocks)[i] += p.blocks[i];
  }
  const LossReport r = loss_total(grid * cg, station * cst, alpha_);
  if (report) *report = r;
  return r.l_total;
}

CorrectorModel fit_corrector(const std::vector<ForecastCycle>& cycles, const std::vector<CycleLabels>& labels,
                             const DownscalerModel& frozen_ds, const TerrainFeatures& terrain,
                             const CorrectorConfig& config) {
  if (!frozen_ds.frozen()) throw ContractError("corrector training requires a frozen downscaler");
  if (config.max_iters < 0 || !(config.step_size > 0.0) || !(config.tolerance >= 0.0)) {
    throw InvalidArgumentError("invalid corrector optimizer settings");
  }
  const CorrectorObjective objective(cycles, labels, frozen_ds, terrain, config.alpha);
  constexpr int P = CorrectorObjective::kLeadParams;
  const int horizon = objective.horizon();

  std::vector<double> theta(objective.parameter_count(), 0.0), grad, blocks, step(theta.size()), trial;
  double loss = objective.value(theta);
  std::vector<double> history{loss};
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    objective.gauss_newton(theta, grad, blocks);
    double gnorm = 0.0;
    for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
    if (gnorm == 0.0) break;
    for (int lead = 0; lead < horizon; ++lead) {
      Eigen::Map<const Eigen::Matrix<double, P, P, Eigen::RowMajor>> h(&blocks[static_cast<std::size_t>(lead) * P * P]);
      Eigen::Map<const Eigen::Matrix<double, P, 1>> g(&grad[static_cast<std::size_t>(lead) * P]);
      const double damping = 1e-10 * std::max(h.trace() / P, 1e-300);
      const Eigen::Matrix<double, P, P> reg = h + damping * Eigen::Matrix<double, P, P>::Identity();
      Eigen::Map<Eigen::Matrix<double, P, 1>> out(&step[static_cast<std::size_t>(lead) * P]);
      out = reg.ldlt().solve(g);
    }
    double eta = config.step_size;
    bool accepted = false;
    double next = loss;
    for (int h = 0; h <= config.max_halvings; ++h, eta *= 0.5) {
      trial = theta;
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] -= eta * step[i];
      next = objective.value(trial);
      if (std::isfinite(next) && next <= loss) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double improvement = loss > 0.0 ? (loss - next) / loss : 0.0;
    theta.swap(trial);
    loss = next;
    history.push_back(loss);
    if (improvement < config.tolerance) {
      ++iter;
      break;
    }
  }

  CorrectorModel model = CorrectorModel::zero(horizon, config.alpha);
  model.set_flat_weights(theta);
  model.downscaler_hash_ = sha256_hex(frozen_ds.serialize());
  model.loss_history_ = std::move(history);
  model.iterations_ = iter;
  return model;
}

}  // namespace acdf
