#include "acdf/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "acdf/errors.hpp"

namespace acdf {

using nlohmann::json;

namespace {

MeanStd mean_std(const std::vector<double>& x) {
  if (x.empty()) return {};
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(x.size()))};
}

void check_aligned(const StationSeries& pred, const StationSeries& obs) {
  if (pred.stations.size() != obs.stations.size() || pred.times.size() != obs.times.size() ||
      pred.data.size() != obs.data.size()) {
    throw ShapeError("prediction and observation series differ in shape");
  }
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string cell(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f +/- %.3f", m.mean, m.std);
  return buf;
}

}  // namespace

SpeedErrors speed_errors(const std::vector<double>& pred_speed, const std::vector<double>& obs_speed) {
  if (pred_speed.size() != obs_speed.size()) throw ShapeError("speed series differ in length");
  std::vector<double> e(pred_speed.size()), a(pred_speed.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = pred_speed[i] - obs_speed[i];
    a[i] = std::abs(e[i]);
  }
  return {mean_std(a), mean_std(e), e.size()};
}

SpeedErrors speed_errors(const StationSeries& pred, const StationSeries& obs) {
  check_aligned(pred, obs);
  std::vector<double> p, o;
  for (std::size_t i = 0; i < pred.data.size(); i += 2) {
    p.push_back(wind_speed(pred.data[i], pred.data[i + 1]));
    o.push_back(wind_speed(obs.data[i], obs.data[i + 1]));
  }
  return speed_errors(p, o);
}

double direction_error(double a_deg, double b_deg) {
  const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

DirectionErrors direction_mae(const std::vector<std::array<double, 2>>& pred,
                              const std::vector<std::array<double, 2>>& obs) {
  if (pred.size() != obs.size()) throw ShapeError("direction series differ in length");
  std::vector<double> e;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (wind_speed(obs[i][0], obs[i][1]) < kCalmSpeed) continue;
    e.push_back(direction_error(wind_direction_deg(pred[i][0], pred[i][1]), wind_direction_deg(obs[i][0], obs[i][1])));
  }
  if (e.empty()) throw EmptySetError("every sample is calm; direction error is undefined");
  return {mean_std(e), e.size()};
}

DirectionErrors direction_mae(const StationSeries& pred, const StationSeries& obs) {
  check_aligned(pred, obs);
  std::vector<std::array<double, 2>> p, o;
  for (std::size_t i = 0; i < pred.data.size(); i += 2) {
    p.push_back({pred.data[i], pred.data[i + 1]});
    o.push_back({obs.data[i], obs.data[i + 1]});
  }
  return direction_mae(p, o);
}

std::vector<EvalSample> collect_samples(const StationSeries& pred, const StationSeries& obs,
                                        const std::vector<TerrainClass>& station_class) {
  check_aligned(pred, obs);
  if (station_class.size() != obs.stations.size()) throw ShapeError("one terrain class per station is required");
  std::vector<EvalSample> out;
  out.reserve(obs.times.size() * obs.stations.size());
  for (std::size_t t = 0; t < obs.times.size(); ++t) {
    for (std::size_t s = 0; s < obs.stations.size(); ++s) {
      out.push_back({pred.at(t, s, 0), pred.at(t, s, 1), obs.at(t, s, 0), obs.at(t, s, 1), station_class[s]});
    }
  }
  return out;
}

std::vector<WindBin> default_wind_bins(double high_wind) {
  char name[32];
  std::snprintf(name, sizeof name, ">%g", high_wind);
  return {{"all", 0.0}, {name, high_wind}};
}

json MetricsReport::to_json() const {
  json j = {{"sample_count", sample_count},
            {"mae_spd", mean_std_json(mae_spd)},
            {"me_spd", mean_std_json(me_spd)},
            {"mae_dir", mae_dir ? mean_std_json(*mae_dir) : json(nullptr)},
            {"dir_count", dir_count},
            {"std_pooling", "station x time"}};
  if (!terrain.empty()) {
    json t = json::object();
    for (const auto& [k, v] : terrain) t[k] = v.to_json();
    j["terrain"] = t;
  }
  if (!wind.empty()) {
    json w = json::object();
    for (const auto& [k, v] : wind) w[k] = v.to_json();
    j["wind"] = w;
  }
  return j;
}

MetricsReport compute_metrics(const std::vector<EvalSample>& samples) {
  MetricsReport r;
  r.sample_count = samples.size();
  if (samples.empty()) return r;
  std::vector<double> p, o;
  std::vector<std::array<double, 2>> pv, ov;
  for (const EvalSample& s : samples) {
    p.push_back(wind_speed(s.pred_u, s.pred_v));
    o.push_back(wind_speed(s.obs_u, s.obs_v));
    pv.push_back({s.pred_u, s.pred_v});
    ov.push_back({s.obs_u, s.obs_v});
  }
  const SpeedErrors se = speed_errors(p, o);
  r.mae_spd = se.mae;
  r.me_spd = se.me;
  try {
    const DirectionErrors de = direction_mae(pv, ov);
    r.mae_dir = de.mae;
    r.dir_count = de.count;
  } catch (const EmptySetError&) {
  }
  return r;
}

MetricsReport stratify(const std::vector<EvalSample>& samples, const std::vector<WindBin>& bins) {
  MetricsReport r = compute_metrics(samples);
  for (TerrainClass c : {TerrainClass::kValley, TerrainClass::kFlat, TerrainClass::kRidge}) {
    std::vector<EvalSample> sub;
    for (const EvalSample& s : samples)
      if (s.terrain == c) sub.push_back(s);
    r.terrain[to_string(c)] = compute_metrics(sub);
  }
  for (const WindBin& b : bins) {
    std::vector<EvalSample> sub;
    for (const EvalSample& s : samples)
      if (b.min_obs_speed <= 0.0 || wind_speed(s.obs_u, s.obs_v) > b.min_obs_speed) sub.push_back(s);
    r.wind[b.name] = compute_metrics(sub);
  }
  return r;
}

double improvement(double mae_a, double mae_b) {
  if (!(mae_a > 0.0)) throw InvalidArgumentError("baseline MAE must be positive");
  return 100.0 * (mae_a - mae_b) / mae_a;
}

double improvement(const MetricsReport& a, const MetricsReport& b) {
  if (a.sample_count != b.sample_count) throw ShapeError("improvement needs reports on the same samples");
  return improvement(a.mae_spd.mean, b.mae_spd.mean);
}

std::vector<LosoFold> make_loso_folds(const std::vector<std::string>& event_ids, double val_fraction,
                                      std::uint64_t seed) {
  if (event_ids.size() < 2) throw InvalidArgumentError("LOSO needs at least two events");
  if (std::set<std::string>(event_ids.begin(), event_ids.end()).size() != event_ids.size()) {
    throw InvalidArgumentError("event ids must be unique");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw InvalidArgumentError("val_fraction must lie in [0, 1)");
  std::vector<LosoFold> folds;
  for (std::size_t i = 0; i < event_ids.size(); ++i) {
    LosoFold f;
    f.held_out = event_ids[i];
    for (std::size_t j = 0; j < event_ids.size(); ++j)
      if (j != i) f.train_events.push_back(event_ids[j]);
    f.val_fraction = val_fraction;
    f.seed = seed + i;
    folds.push_back(std::move(f));
  }
  return folds;
}

FoldSplit split_samples(const LosoFold& fold, const std::vector<std::string>& sample_events) {
  FoldSplit out;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < sample_events.size(); ++i) {
    if (sample_events[i] == fold.held_out) {
      out.test.push_back(i);
    } else if (std::find(fold.train_events.begin(), fold.train_events.end(), sample_events[i]) !=
               fold.train_events.end()) {
      pool.push_back(i);
    }
  }
  std::mt19937_64 rng(fold.seed);
  // Fisher-Yates with an explicit draw keeps the order independent of the
  // standard library's shuffle implementation.
  for (std::size_t i = pool.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(pool[i - 1], pool[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(fold.val_fraction * static_cast<double>(pool.size())));
  out.validation.assign(pool.begin(), pool.begin() + static_cast<long>(n_val));
  out.train.assign(pool.begin() + static_cast<long>(n_val), pool.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.train.begin(), out.train.end());
  for (const auto* part : {&out.train, &out.validation}) {
    for (std::size_t i : *part) {
      if (sample_events[i] == fold.held_out) throw ContractError("held-out event leaked into training data");
    }
  }
  return out;
}

std::string render_table(const std::vector<TableRow>& rows) {
  const std::vector<std::string> head{"Testing Event", "Model", "MAE_spd (m/s)", "ME_spd (m/s)", "MAE_dir (deg)",
                                      "Impr. (%)"};
  std::vector<std::vector<std::string>> cells;
  for (const TableRow& r : rows) {
    char impr[32] = "-";
    if (r.improvement) std::snprintf(impr, sizeof impr, "%.1f", *r.improvement);
    cells.push_back({r.event, r.model, cell(r.report.mae_spd), cell(r.report.me_spd),
                     r.report.mae_dir ? cell(*r.report.mae_dir) : std::string("-"), impr});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c] << std::string(width[c] - row[c].size(), ' ') << (c + 1 < row.size() ? "  " : "");
    }
    out << '\n';
  };
  line(head);
  std::vector<std::string> rule;
  for (std::size_t w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  std::string last_event;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::vector<std::string> row = cells[i];
    if (row[0] == last_event) row[0] = "";
    last_event = cells[i][0];
    line(row);
  }
  return out.str();
}

std::string histogram_csv(const std::vector<std::string>& names, const std::vector<std::vector<double>>& speeds,
                          double bin_width, double max_speed) {
  if (names.size() != speeds.size()) throw ShapeError("one name per histogram series is required");
  if (!(bin_width > 0.0) || !(max_speed > bin_width)) throw InvalidArgumentError("invalid histogram bins");
  const auto bins = static_cast<std::size_t>(std::ceil(max_speed / bin_width));
  std::vector<std::vector<double>> density(speeds.size(), std::vector<double>(bins, 0.0));
  for (std::size_t k = 0; k < speeds.size(); ++k) {
    for (double s : speeds[k]) {
      const auto b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, s) / bin_width));
      density[k][b] += 1.0;
    }
    if (!speeds[k].empty())
      for (double& d : density[k]) d /= static_cast<double>(speeds[k].size()) * bin_width;
  }
  std::ostringstream out;
  out << "bin_lo,bin_hi";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (std::size_t b = 0; b < bins; ++b) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g", b * bin_width, (b + 1) * bin_width);
    out << buf;
    for (std::size_t k = 0; k < speeds.size(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.6g", density[k][b]);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace acdf
