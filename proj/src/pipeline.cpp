#include "acdf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "acdf/errors.hpp"
#include "acdf/grid_io.hpp"
#include "acdf/hashing.hpp"
#include "acdf/parallel.hpp"
#include "acdf/patches.hpp"
#include "acdf/resample.hpp"
#include "acdf/terrain.hpp"

namespace acdf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTimingFile = "timing.json";
constexpr const char* kManifestFile = "manifest.json";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError("cannot parse " + what + " '" + text + "'");
  }
}

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void finish_run(const RunConfig& config, const fs::path& out_dir) {
  write_json(out_dir / "resolved_config.json", config.to_json());
}

std::vector<double> speeds_of(const std::vector<EvalSample>& samples, bool predicted) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const EvalSample& s : samples) {
    out.push_back(predicted ? wind_speed(s.pred_u, s.pred_v) : wind_speed(s.obs_u, s.obs_v));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario

const SyntheticEvent& ScenarioData::event(const std::string& id) const {
  for (const SyntheticEvent& e : events) {
    if (e.id == id) return e;
  }
  throw InvalidArgumentError("unknown event '" + id + "'");
}

std::vector<std::string> ScenarioData::event_ids() const {
  std::vector<std::string> ids;
  for (const SyntheticEvent& e : events) ids.push_back(e.id);
  return ids;
}

ScenarioData build_scenario(const RunConfig& config) {
  config.validate();
  ScenarioData s;
  s.region = build_region(config.region_params());
  const ScenarioTiming timing{config.scenario.start, config.scenario.hours};
  for (const EventConfig& e : config.scenario.events) {
    s.events.push_back(build_event(s.region, EventSpec{e.id, e.vortex, e.bias, e.seed}, timing, config.scenario.k_tpi,
                                   config.scenario.k_rough, config.scenario.coupling));
  }
  return s;
}

std::string stations_csv(const StationSeries& series) {
  std::string out = "station_id,lat,lon,time,u,v\n";
  for (std::size_t s = 0; s < series.stations.size(); ++s) {
    const Station& st = series.stations[s];
    const std::string prefix = st.id + "," + fixed6(st.lat) + "," + fixed6(st.lon) + ",";
    for (std::size_t t = 0; t < series.times.size(); ++t) {
      out += prefix + format_utc(series.times[t]) + "," + format_number(series.at(t, s, 0)) + "," +
             format_number(series.at(t, s, 1)) + "\n";
    }
  }
  return out;
}

StationSeries parse_stations_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "station_id,lat,lon,time,u,v") {
    throw FormatError("stations CSV must start with the header station_id,lat,lon,time,u,v");
  }
  struct Row {
    std::size_t station;
    TimePoint time;
    double u, v;
  };
  StationSeries out;
  std::vector<Row> rows;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = "line " + std::to_string(line_no);
    if (cells.size() != 6) throw FormatError("stations CSV " + where + " does not have 6 columns");
    Station st{cells[0], parse_double(cells[1], "latitude at " + where), parse_double(cells[2], "longitude at " + where)};
    auto it = index.find(st.id);
    if (it == index.end()) {
      it = index.emplace(st.id, out.stations.size()).first;
      out.stations.push_back(st);
    } else if (out.stations[it->second].lat != st.lat || out.stations[it->second].lon != st.lon) {
      throw FormatError("station " + st.id + " changes position at " + where);
    }
    TimePoint t;
    try {
      t = parse_utc(cells[3]);
    } catch (const Error&) {
      throw FormatError("bad time at stations CSV " + where);
    }
    rows.push_back({it->second, t, parse_double(cells[4], "u at " + where), parse_double(cells[5], "v at " + where)});
  }
  for (const Row& r : rows) {
    if (std::find(out.times.begin(), out.times.end(), r.time) == out.times.end()) out.times.push_back(r.time);
  }
  std::sort(out.times.begin(), out.times.end());
  if (out.stations.empty()) throw FormatError("stations CSV has no rows");
  if (rows.size() != out.stations.size() * out.times.size()) {
    throw FormatError("stations CSV does not hold every station at every time");
  }
  out.data.assign(rows.size() * 2, 0.0);
  std::vector<char> filled(rows.size(), 0);
  for (const Row& r : rows) {
    const std::size_t t = static_cast<std::size_t>(std::lower_bound(out.times.begin(), out.times.end(), r.time) - out.times.begin());
    const std::size_t k = t * out.stations.size() + r.station;
    if (filled[k]) throw FormatError("stations CSV repeats station " + out.stations[r.station].id);
    filled[k] = 1;
    out.at(t, r.station, 0) = r.u;
    out.at(t, r.station, 1) = r.v;
  }
  return out;
}

void write_scenario(const ScenarioData& scenario, const fs::path& dir) {
  fs::create_directories(dir / "events");
  write_terrain(dir / "terrain.acdf", scenario.region.terrain);
  write_json(dir / "network.json", network_to_json(scenario.region.network));
  for (const SyntheticEvent& e : scenario.events) {
    const fs::path d = dir / "events" / e.id;
    fs::create_directories(d);
    write_wind_field(d / "truth_fine.acdf", e.truth_fine);
    write_wind_field(d / "truth_coarse.acdf", e.truth_coarse);
    write_wind_field(d / "forecast_coarse.acdf", e.forecast_coarse);
    write_file(d / "stations.csv", stations_csv(e.stations));
  }
}

ScenarioData read_scenario(const RunConfig& config, const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("scenario directory " + dir.string() + " does not exist; run synth first");
  ScenarioData s;
  Region& r = s.region;
  r.coarse = config.coarse_grid();
  r.fine = config.fine_grid();
  r.terrain = read_terrain(dir / "terrain.acdf");
  if (!r.terrain.spec.same_geometry(r.fine)) throw AlignmentError("terrain.acdf does not match the configured fine grid");
  r.features = terrain_features(r.terrain, config.scenario.tpi_radius_cells);
  r.network = network_from_json(read_json(dir / "network.json"));
  for (const EventConfig& ec : config.scenario.events) {
    const fs::path d = dir / "events" / ec.id;
    SyntheticEvent e;
    e.id = ec.id;
    e.truth_fine = read_wind_field(d / "truth_fine.acdf");
    e.truth_coarse = read_wind_field(d / "truth_coarse.acdf");
    e.forecast_coarse = read_wind_field(d / "forecast_coarse.acdf");
    e.stations = parse_stations_csv(read_file(d / "stations.csv"));
    if (!e.truth_fine.spec.same_geometry(r.fine) || !e.truth_coarse.spec.same_geometry(r.coarse) ||
        !e.forecast_coarse.spec.same_geometry(r.coarse)) {
      throw AlignmentError("event " + e.id + " grids do not match the configured grids");
    }
    if (e.truth_coarse.times != e.forecast_coarse.times || e.stations.times != e.truth_coarse.times) {
      throw AlignmentError("event " + e.id + " files do not share one time axis");
    }
    if (r.stations.empty()) r.stations = e.stations.stations;
    s.events.push_back(std::move(e));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training

void append_cycles(CycleSet& set, const SyntheticEvent& event, int history, int horizon, int spacing_hours) {
  for (TimePoint issue : cycle_issue_times(event.forecast_coarse.times, history, horizon, spacing_hours)) {
    set.cycles.push_back(make_cycle(event.forecast_coarse, event.truth_coarse, issue, history, horizon));
    set.labels.push_back(make_labels(event.truth_coarse, event.stations, issue, horizon));
    set.events.push_back(event.id);
  }
}

DownscalerModel train_downscaler(const Region& region, const std::vector<const SyntheticEvent*>& events,
                                 const DownscalerConfig& config) {
  if (events.empty()) throw InvalidArgumentError("downscaler training needs at least one event");
  const PatchLayout layout = make_patch_layout(region.coarse, region.fine, config.patch_deg, config.stride_deg);
  DownscalerFitter fitter(config);
  for (const SyntheticEvent* e : events) {
    for_each_patch(e->truth_coarse, e->truth_fine, region.features, layout, e->id,
                   [&](const PatchPair& p) { fitter.add(p); });
  }
  return freeze(fitter.finish());
}

TrainResult train_models(const RunConfig& config, const ScenarioData& scenario,
                         const std::vector<std::string>& train_ids, std::uint64_t split_seed) {
  if (train_ids.empty()) throw InvalidArgumentError("training needs at least one event");
  std::vector<const SyntheticEvent*> events;
  for (const std::string& id : train_ids) events.push_back(&scenario.event(id));

  TrainResult out;
  out.downscaler = train_downscaler(scenario.region, events, config.downscaler);

  CycleSet all;
  for (const SyntheticEvent* e : events) {
    append_cycles(all, *e, config.corrector.history, config.corrector.horizon, config.corrector.cycle_spacing_hours);
  }
  if (all.cycles.empty()) throw InvalidArgumentError("training events are too short for a single forecast cycle");
  LosoFold fold;
  fold.train_events = train_ids;
  fold.val_fraction = config.eval.val_fraction;
  fold.seed = split_seed;
  FoldSplit split = split_samples(fold, all.events);
  if (split.train.empty()) {
    // Too few cycles to hold any back.
    split.train.insert(split.train.end(), split.validation.begin(), split.validation.end());
    split.validation.clear();
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  auto subset = [&](const std::vector<std::size_t>& idx) {
    CycleSet s;
    for (std::size_t i : idx) {
      s.cycles.push_back(all.cycles[i]);
      s.labels.push_back(all.labels[i]);
      s.events.push_back(all.events[i]);
    }
    return s;
  };
  const CycleSet train = subset(split.train);
  const CycleSet val = subset(split.validation);

  out.corrector = fit_corrector(train.cycles, train.labels, out.downscaler, scenario.region.features, config.corrector.fit);

  json val_j = nullptr;
  if (!val.cycles.empty()) {
    const CorrectorObjective objective(val.cycles, val.labels, out.downscaler, scenario.region.features,
                                       config.corrector.fit.alpha);
    const LossReport l = objective.evaluate(out.corrector.flat_weights());
    const LossReport raw = objective.evaluate(std::vector<double>(objective.parameter_count(), 0.0));
    val_j = {{"cycles", val.cycles.size()},
             {"l_grid", l.l_grid},
             {"l_station", l.l_station},
             {"l_total", l.l_total},
             {"raw_l_total", raw.l_total}};
  }
  const DownscalerTraining& dt = out.downscaler.training();
  out.report = {{"train_events", train_ids},
                {"split_seed", split_seed},
                {"downscaler",
                 {{"patch_pairs", dt.sample_count},
                  {"loss_history", dt.loss_history},
                  {"ridge_fallback", dt.ridge_fallback}}},
                {"corrector",
                 {{"train_cycles", train.cycles.size()},
                  {"iterations", out.corrector.iterations()},
                  {"loss_trajectory", out.corrector.loss_history()}}},
                {"validation", val_j}};
  return out;
}

// ---------------------------------------------------------------------------
// Station sampling

StationSeries sample_at_stations(const WindField& field, const std::vector<Station>& stations) {
  return sample_stations(field, stations);
}

StationSeries downscale_at_stations(const DownscalerModel& model, const WindField& coarse,
                                    const TerrainFeatures& terrain, const std::vector<Station>& stations) {
  StationSeries out;
  out.stations = stations;
  out.times = coarse.times;
  out.data.assign(stations.size() * coarse.time_count() * 2, 0.0);
  parallel_for(stations.size(), [&](std::size_t s) {
    const BilinearStencil st = bilinear_stencil(terrain.spec, stations[s].lat, stations[s].lon);
    const int x1 = std::min(st.x0 + 1, terrain.spec.nx - 1), y1 = std::min(st.y0 + 1, terrain.spec.ny - 1);
    for (std::size_t t = 0; t < coarse.time_count(); ++t) {
      std::array<std::array<double, 2>, 4> node{};
      node[0] = downscale_node(model, coarse, t, terrain, st.x0, st.y0);
      node[1] = st.wx > 0.0 ? downscale_node(model, coarse, t, terrain, x1, st.y0) : node[0];
      node[2] = st.wy > 0.0 ? downscale_node(model, coarse, t, terrain, st.x0, y1) : node[0];
      node[3] = st.wx > 0.0 && st.wy > 0.0 ? downscale_node(model, coarse, t, terrain, x1, y1) : node[0];
      for (int c = 0; c < 2; ++c) {
        out.at(t, s, c) = st.apply([&](int y, int x) {
          return node[static_cast<std::size_t>((y == st.y0 ? 0 : 2) + (x == st.x0 ? 0 : 1))][static_cast<std::size_t>(c)];
        });
      }
    }
  });
  return out;
}

std::vector<TerrainClass> station_classes(const Region& region) {
  const TerrainFeatures& f = region.features;
  std::vector<double> tpi(f.spec.node_count());
  for (int y = 0; y < f.spec.ny; ++y)
    for (int x = 0; x < f.spec.nx; ++x) tpi[static_cast<std::size_t>(y) * f.spec.nx + x] = f.at(y, x, kFeatTpi);
  std::vector<TerrainClass> out;
  for (const Station& s : region.stations) out.push_back(classify_tpi(sample_scalar(f.spec, tpi, s.lat, s.lon)));
  return out;
}

// ---------------------------------------------------------------------------
// Forecast

json StageTimer::to_json() const {
  json s = json::object();
  for (const auto& [name, secs] : stages) s[name] = secs;
  return {{"stages_s", s}, {"total_s", total}};
}

ForecastResult run_forecast(const Region& region, const SyntheticEvent& event, TimePoint issue,
                            const DownscalerModel& downscaler, const CorrectorModel& corrector, int history) {
  if (!downscaler.frozen()) throw ContractError("forecasting requires a frozen downscaler");
  ForecastResult r;
  const auto start = Clock::now();
  auto stage = Clock::now();
  const ForecastCycle cycle = make_cycle(event.forecast_coarse, event.truth_coarse, issue, history, corrector.horizon());
  r.timing.stages.emplace_back("cycle_assembly", seconds_since(stage));
  stage = Clock::now();
  r.corrected = apply_correction(corrector, cycle);
  r.timing.stages.emplace_back("correction", seconds_since(stage));
  stage = Clock::now();
  r.downscaled = downscale_field(downscaler, r.corrected, region.features);
  r.timing.stages.emplace_back("downscaling", seconds_since(stage));
  r.timing.total = seconds_since(start);
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult run_eval(const RunConfig& config, const ScenarioData& scenario) {
  const std::vector<std::string> ids = scenario.event_ids();
  const auto folds = make_loso_folds(ids, config.eval.val_fraction, config.seeds.eval);
  const auto classes = station_classes(scenario.region);
  const auto bins = default_wind_bins(config.eval.high_wind);
  const int h = config.corrector.history, tau = config.corrector.horizon;

  struct ModelSamples {
    std::vector<EvalSample> raw, corrected, full;
  };
  std::vector<ModelSamples> per_fold(folds.size());
  std::vector<json> fold_reports(folds.size());
  EvalResult out;

  for (std::size_t f = 0; f < folds.size(); ++f) {
    const LosoFold& fold = folds[f];
    const TrainResult models = train_models(config, scenario, fold.train_events, fold.seed);
    const SyntheticEvent& test = scenario.event(fold.held_out);
    CycleSet cycles;
    append_cycles(cycles, test, h, tau, config.eval.cycle_spacing_hours);
    if (cycles.cycles.empty()) throw InvalidArgumentError("event " + test.id + " is too short for an evaluation cycle");
    ModelSamples& ms = per_fold[f];
    for (std::size_t c = 0; c < cycles.cycles.size(); ++c) {
      const ForecastCycle& cycle = cycles.cycles[c];
      const StationSeries& obs = cycles.labels[c].stations;
      const WindField raw = cycle.forecast.time_window(static_cast<std::size_t>(h), static_cast<std::size_t>(tau));
      const WindField corrected = apply_correction(models.corrector, cycle);
      auto append = [&](std::vector<EvalSample>& dst, const StationSeries& pred) {
        const auto s = collect_samples(pred, obs, classes);
        dst.insert(dst.end(), s.begin(), s.end());
      };
      append(ms.raw, sample_at_stations(raw, scenario.region.stations));
      append(ms.corrected, sample_at_stations(corrected, scenario.region.stations));
      append(ms.full, downscale_at_stations(models.downscaler, corrected, scenario.region.features,
                                            scenario.region.stations));
    }
    const MetricsReport raw_m = stratify(ms.raw, bins);
    const MetricsReport corr_m = stratify(ms.corrected, bins);
    const MetricsReport full_m = stratify(ms.full, bins);
    out.rows.push_back({test.id, "Raw", raw_m, std::nullopt});
    out.rows.push_back({test.id, "ACDF-Corr", corr_m, improvement(raw_m, corr_m)});
    out.rows.push_back({test.id, "ACDF", full_m, improvement(raw_m, full_m)});
    fold_reports[f] = {{"held_out", fold.held_out},
                       {"train_events", fold.train_events},
                       {"seed", fold.seed},
                       {"test_cycles", cycles.cycles.size()},
                       {"training", models.report},
                       {"models", {{"raw", raw_m.to_json()}, {"corrected", corr_m.to_json()}, {"full", full_m.to_json()}}},
                       {"improvement_pct", {{"corrected", improvement(raw_m, corr_m)}, {"full", improvement(raw_m, full_m)}}}};
    out.histograms["speed_hist_" + test.id] =
        histogram_csv({"obs", "raw", "corrected", "full"},
                      {speeds_of(ms.raw, false), speeds_of(ms.raw, true), speeds_of(ms.corrected, true),
                       speeds_of(ms.full, true)},
                      config.eval.histogram_bin_width, config.eval.histogram_max);
  }

  ModelSamples pooled;
  for (const ModelSamples& m : per_fold) {
    pooled.raw.insert(pooled.raw.end(), m.raw.begin(), m.raw.end());
    pooled.corrected.insert(pooled.corrected.end(), m.corrected.begin(), m.corrected.end());
    pooled.full.insert(pooled.full.end(), m.full.begin(), m.full.end());
  }
  const MetricsReport raw_m = stratify(pooled.raw, bins);
  const MetricsReport corr_m = stratify(pooled.corrected, bins);
  const MetricsReport full_m = stratify(pooled.full, bins);
  out.rows.push_back({"Average", "Raw", raw_m, std::nullopt});
  out.rows.push_back({"Average", "ACDF-Corr", corr_m, improvement(raw_m, corr_m)});
  out.rows.push_back({"Average", "ACDF", full_m, improvement(raw_m, full_m)});

  json ridge = nullptr;
  if (corr_m.terrain.count("ridge") && full_m.terrain.count("ridge") && corr_m.terrain.at("ridge").mae_spd.mean > 0.0) {
    ridge = improvement(corr_m.terrain.at("ridge"), full_m.terrain.at("ridge"));
  }
  out.report = {{"folds", fold_reports},
                {"pooled",
                 {{"models", {{"raw", raw_m.to_json()}, {"corrected", corr_m.to_json()}, {"full", full_m.to_json()}}},
                  {"improvement_pct", {{"corrected", improvement(raw_m, corr_m)}, {"full", improvement(raw_m, full_m)}}},
                  {"ridge_improvement_full_vs_corrected_pct", ridge}}},
                {"high_wind_threshold", config.eval.high_wind},
                {"station_count", scenario.region.stations.size()}};
  out.table = render_table(out.rows);
  return out;
}

// ---------------------------------------------------------------------------
// Commands

json build_manifest(const std::string& command, const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir);
    if (rel == kManifestFile) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.generic_string() < b.generic_string();
  });
  json list = json::array();
  for (const fs::path& rel : files) {
    const fs::path full = dir / rel;
    json item = {{"path", rel.generic_string()}, {"bytes", fs::file_size(full)}};
    item["sha256"] = rel == kTimingFile ? json(nullptr) : json(sha256_file(full));
    list.push_back(item);
  }
  return {{"command", command}, {"output_dir", dir.string()}, {"files", list}};
}

namespace {

json seal(const std::string& command, const RunConfig& config, const fs::path& out_dir) {
  finish_run(config, out_dir);
  json m = build_manifest(command, out_dir);
  write_json(out_dir / kManifestFile, m);
  return m;
}

}  // namespace

json cmd_synth(const RunConfig& config, const fs::path& out_dir) {
  const ScenarioData s = build_scenario(config);
  fs::create_directories(out_dir);
  write_scenario(s, out_dir);
  return seal("synth", config, out_dir);
}

json cmd_train(const RunConfig& config, const fs::path& scenario_dir, const fs::path& out_dir,
               const std::optional<std::string>& holdout) {
  const ScenarioData s = read_scenario(config, scenario_dir);
  std::vector<std::string> ids;
  for (const std::string& id : s.event_ids()) {
    if (!holdout || id != *holdout) ids.push_back(id);
  }
  if (holdout && ids.size() == s.events.size()) throw InvalidArgumentError("holdout event '" + *holdout + "' is not in the scenario");
  const TrainResult r = train_models(config, s, ids, config.seeds.eval);
  fs::create_directories(out_dir);
  write_file(out_dir / "downscaler.json", r.downscaler.serialize() + "\n");
  write_file(out_dir / "corrector.json", r.corrector.serialize() + "\n");
  json report = r.report;
  report["holdout"] = holdout ? json(*holdout) : json(nullptr);
  write_json(out_dir / "training_report.json", report);
  return seal("train", config, out_dir);
}

json cmd_forecast(const RunConfig& config, const fs::path& scenario_dir, const fs::path& model_dir,
                  const std::string& event_id, TimePoint issue, const fs::path& out_dir) {
  const auto start = Clock::now();
  auto stage = Clock::now();
  const ScenarioData s = read_scenario(config, scenario_dir);
  const DownscalerModel ds = DownscalerModel::from_json(read_json(model_dir / "downscaler.json"));
  const CorrectorModel corr = CorrectorModel::from_json(read_json(model_dir / "corrector.json"));
  if (!ds.frozen()) throw ContractError("downscaler.json is not frozen");
  if (!corr.downscaler_hash().empty() && corr.downscaler_hash() != sha256_hex(ds.serialize())) {
    throw ContractError("corrector.json was trained against a different downscaler");
  }
  if (corr.horizon() != config.corrector.horizon) {
    throw ShapeError("corrector horizon " + std::to_string(corr.horizon()) + " differs from the configured horizon");
  }
  const double load_s = seconds_since(stage);

  ForecastResult r = run_forecast(s.region, s.event(event_id), issue, ds, corr, config.corrector.history);
  fs::create_directories(out_dir);
  stage = Clock::now();
  write_wind_field(out_dir / "corrected_coarse.acdf", r.corrected);
  write_wind_field(out_dir / "downscaled_fine.acdf", r.downscaled);
  const double write_s = seconds_since(stage);

  StageTimer timing;
  timing.stages.emplace_back("load", load_s);
  for (const auto& st : r.timing.stages) timing.stages.push_back(st);
  timing.stages.emplace_back("write", write_s);
  timing.total = seconds_since(start);
  json tj = timing.to_json();
  tj["event"] = event_id;
  tj["issue_time"] = format_utc(issue);
  tj["threads"] = worker_count();
  write_json(out_dir / kTimingFile, tj);
  return seal("forecast", config, out_dir);
}

json cmd_risk(const RunConfig& config, const fs::path& wind_file, const fs::path& network_file,
              const fs::path& out_dir) {
  const WindField wind = read_wind_field(wind_file);
  const Network network = network_from_json(read_json(network_file));
  const RiskSeries r = risk_forecast(wind, network, config.fragility, config.risk);
  fs::create_directories(out_dir);
  write_file(out_dir / "risk.csv", risk_csv(r));
  write_json(out_dir / "risk.geojson", risk_geojson(r, network));
  json lines = json::array();
  for (std::size_t l = 0; l < r.line_ids.size(); ++l) {
    const auto first = r.first_exceed(l);
    lines.push_back({{"id", r.line_ids[l]},
                     {"max_prob", std::stod(format_number(r.line_max(l)))},
                     {"first_exceed_time", first ? json(format_utc(r.times[*first])) : json(nullptr)},
                     {"flagged", first.has_value()}});
  }
  write_json(out_dir / "risk_summary.json",
             {{"threshold", r.threshold}, {"mc_samples", r.mc_samples}, {"seed", r.seed}, {"lines", lines}});
  return seal("risk", config, out_dir);
}

json cmd_eval(const RunConfig& config, const fs::path& scenario_dir, const fs::path& out_dir) {
  const ScenarioData s = read_scenario(config, scenario_dir);
  if (s.events.size() < 2) throw InvalidArgumentError("leave-one-storm-out evaluation needs at least two events");
  const EvalResult r = run_eval(config, s);
  fs::create_directories(out_dir / "histograms");
  write_json(out_dir / "report.json", r.report);
  write_file(out_dir / "table.txt", r.table);
  for (const auto& [stem, csv] : r.histograms) write_file(out_dir / "histograms" / (stem + ".csv"), csv);
  return seal("eval", config, out_dir);
}

}  // namespace acdf
