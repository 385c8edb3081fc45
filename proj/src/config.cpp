#include "acdf/config.hpp"

#include <set>

#include "acdf/errors.hpp"
#include "acdf/grid_io.hpp"

namespace acdf {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(key_path(key) + " has the wrong type");
    }
  }

  void get_time(const char* key, TimePoint& out) {
    std::string text;
    get(key, text);
    if (text.empty()) return;
    try {
      out = parse_utc(text);
    } catch (const Error&) {
      throw ConfigError(key_path(key) + " must be an ISO-8601 UTC time such as 2021-07-20T00:00:00Z");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key_path(key) + "'");
    }
  }

private:
  std::string label() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

VortexParams read_vortex(const json& j, const std::string& path) {
  Section s(j, path);
  VortexParams v;
  s.get("v_max", v.v_max);
  s.get("r_max_km", v.r_max_km);
  s.get("decay", v.decay);
  s.get("add_translation", v.add_translation);
  if (const json* track = s.child("track")) {
    if (!track->is_array()) throw ConfigError(s.key_path("track") + " must be an array");
    for (std::size_t i = 0; i < track->size(); ++i) {
      Section p((*track)[i], s.key_path("track") + "[" + std::to_string(i) + "]");
      TrackPoint tp;
      p.get_time("time", tp.time);
      p.get("lat", tp.lat);
      p.get("lon", tp.lon);
      p.finish();
      v.track.push_back(tp);
    }
  }
  s.finish();
  return v;
}

BiasModel read_bias(const json& j, const std::string& path) {
  Section s(j, path);
  BiasModel b;
  s.get("gain", b.gain);
  s.get("offset", b.offset);
  s.get("displacement_lat", b.displacement_lat);
  s.get("displacement_lon", b.displacement_lon);
  s.get("noise_sigma", b.noise_sigma);
  s.finish();
  return b;
}

json vortex_json(const VortexParams& v) {
  json track = json::array();
  for (const TrackPoint& p : v.track) track.push_back({{"time", format_utc(p.time)}, {"lat", p.lat}, {"lon", p.lon}});
  return {{"v_max", v.v_max},
          {"r_max_km", v.r_max_km},
          {"decay", v.decay},
          {"add_translation", v.add_translation},
          {"track", track}};
}

json bias_json(const BiasModel& b) {
  return {{"gain", b.gain},
          {"offset", b.offset},
          {"displacement_lat", b.displacement_lat},
          {"displacement_lon", b.displacement_lon},
          {"noise_sigma", b.noise_sigma}};
}

void read_terrain_params(Section& s, TerrainSynthParams& t) {
  s.get("hills", t.hills);
  s.get("hill_height_min", t.hill_height_min);
  s.get("hill_height_max", t.hill_height_max);
  s.get("hill_radius_km_min", t.hill_radius_km_min);
  s.get("hill_radius_km_max", t.hill_radius_km_max);
  s.get("ridges", t.ridges);
  s.get("ridge_height_min", t.ridge_height_min);
  s.get("ridge_height_max", t.ridge_height_max);
  s.get("ridge_length_km_min", t.ridge_length_km_min);
  s.get("ridge_length_km_max", t.ridge_length_km_max);
  s.get("ridge_width_km_min", t.ridge_width_km_min);
  s.get("ridge_width_km_max", t.ridge_width_km_max);
  s.get("sea_fraction", t.sea_fraction);
  s.get("urban_patches", t.urban_patches);
  s.get("urban_radius_km", t.urban_radius_km);
}

json terrain_params_json(const TerrainSynthParams& t) {
  return {{"hills", t.hills},
          {"hill_height_min", t.hill_height_min},
          {"hill_height_max", t.hill_height_max},
          {"hill_radius_km_min", t.hill_radius_km_min},
          {"hill_radius_km_max", t.hill_radius_km_max},
          {"ridges", t.ridges},
          {"ridge_height_min", t.ridge_height_min},
          {"ridge_height_max", t.ridge_height_max},
          {"ridge_length_km_min", t.ridge_length_km_min},
          {"ridge_length_km_max", t.ridge_length_km_max},
          {"ridge_width_km_min", t.ridge_width_km_min},
          {"ridge_width_km_max", t.ridge_width_km_max},
          {"sea_fraction", t.sea_fraction},
          {"urban_patches", t.urban_patches},
          {"urban_radius_km", t.urban_radius_km}};
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::vector<EventConfig> default_events(TimePoint start, std::size_t hours) {
  std::vector<EventConfig> out;
  const TimePoint end = start + static_cast<long>(hours) * kHour;
  const double shifts[] = {0.0, 0.15, 0.3};
  const double vmax[] = {38.0, 42.0, 34.0};
  for (int k = 0; k < 3; ++k) {
    EventConfig e;
    e.id = "TC" + std::to_string(k + 1);
    e.vortex.v_max = vmax[k];
    e.vortex.r_max_km = 25.0;
    e.vortex.decay = 0.5;
    e.vortex.track = {{start, 27.9, 119.1 + shifts[k]}, {end, 28.9, 118.0 + shifts[k]}};
    e.bias.gain = 0.8;
    e.bias.offset = -1.0;
    e.bias.noise_sigma = 0.3;
    e.seed = 100 + static_cast<std::uint64_t>(k);
    out.push_back(std::move(e));
  }
  return out;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  c.scenario.start = parse_utc("2021-07-20T00:00:00Z");

  if (const json* g = root.child("grids")) {
    Section s(*g, "grids");
    s.get("lon_min", c.grids.lon_min);
    s.get("lon_max", c.grids.lon_max);
    s.get("lat_min", c.grids.lat_min);
    s.get("lat_max", c.grids.lat_max);
    s.get("coarse_res", c.grids.coarse_res);
    s.get("fine_res", c.grids.fine_res);
    s.finish();
  }

  bool events_given = false;
  if (const json* sc = root.child("scenario")) {
    Section s(*sc, "scenario");
    ScenarioConfig& o = c.scenario;
    s.get_time("start", o.start);
    s.get("hours", o.hours);
    s.get("k_tpi", o.k_tpi);
    s.get("k_rough", o.k_rough);
    std::string coupling;
    s.get("truth_coupling", coupling);
    if (!coupling.empty()) {
      try {
        o.coupling = truth_coupling_from_string(coupling);
      } catch (const Error&) {
        throw ConfigError("scenario.truth_coupling must be 'block_mean' or 'modulated_upsample'");
      }
    }
    if (const json* t = s.child("terrain")) {
      Section ts(*t, "scenario.terrain");
      read_terrain_params(ts, o.terrain);
      ts.finish();
    }
    s.get("tpi_radius_cells", o.tpi_radius_cells);
    s.get("stations", o.stations);
    if (const json* n = s.child("network")) {
      Section ns(*n, "scenario.network");
      ns.get("lines", o.lines);
      ns.get("towers_per_line", o.towers_per_line);
      ns.get("span_km", o.span_km);
      ns.finish();
    }
    if (const json* ev = s.child("events")) {
      if (!ev->is_array()) throw ConfigError("scenario.events must be an array");
      events_given = true;
      for (std::size_t i = 0; i < ev->size(); ++i) {
        const std::string path = "scenario.events[" + std::to_string(i) + "]";
        Section es((*ev)[i], path);
        EventConfig e;
        es.get("id", e.id);
        es.get("seed", e.seed);
        if (const json* v = es.child("vortex")) e.vortex = read_vortex(*v, path + ".vortex");
        if (const json* b = es.child("bias")) e.bias = read_bias(*b, path + ".bias");
        es.finish();
        o.events.push_back(std::move(e));
      }
    }
    s.finish();
  }
  if (!events_given) c.scenario.events = default_events(c.scenario.start, c.scenario.hours);

  if (const json* cr = root.child("corrector")) {
    Section s(*cr, "corrector");
    s.get("history", c.corrector.history);
    s.get("horizon", c.corrector.horizon);
    s.get("cycle_spacing_hours", c.corrector.cycle_spacing_hours);
    s.get("alpha", c.corrector.fit.alpha);
    s.get("max_iters", c.corrector.fit.max_iters);
    s.get("step_size", c.corrector.fit.step_size);
    s.get("tolerance", c.corrector.fit.tolerance);
    s.get("max_halvings", c.corrector.fit.max_halvings);
    s.finish();
  }

  if (const json* ds = root.child("downscaler")) {
    Section s(*ds, "downscaler");
    s.get("patch_deg", c.downscaler.patch_deg);
    s.get("stride_deg", c.downscaler.stride_deg);
    s.get("ridge_lambda", c.downscaler.ridge_lambda);
    std::vector<bool> active;
    s.get("active", active);
    if (!active.empty()) {
      if (active.size() != c.downscaler.active.size()) {
        throw ConfigError("downscaler.active must list " + std::to_string(kDownscalerTermCount) + " flags");
      }
      std::copy(active.begin(), active.end(), c.downscaler.active.begin());
    }
    s.finish();
  }

  if (const json* rk = root.child("risk")) {
    Section s(*rk, "risk");
    s.get("mc_samples", c.risk.mc_samples);
    s.get("seed", c.risk.seed);
    s.get("substeps_per_hour", c.risk.substeps_per_hour);
    s.get("rho", c.risk.rho);
    s.get("threshold", c.risk.threshold);
    std::string mode;
    s.get("correlation", mode);
    if (mode == "independent") {
      c.risk.mode = CorrelationMode::kIndependent;
    } else if (mode == "common_factor") {
      c.risk.mode = CorrelationMode::kCommonFactor;
    } else if (!mode.empty()) {
      throw ConfigError("risk.correlation must be 'independent' or 'common_factor'");
    }
    if (const json* f = s.child("fragility")) {
      Section fs(*f, "risk.fragility");
      fs.get("angles", c.fragility.angles);
      fs.get("mu", c.fragility.mu);
      fs.get("sigma", c.fragility.sigma);
      fs.finish();
    }
    s.finish();
  }

  if (const json* ev = root.child("eval")) {
    Section s(*ev, "eval");
    s.get("val_fraction", c.eval.val_fraction);
    s.get("high_wind", c.eval.high_wind);
    s.get("cycle_spacing_hours", c.eval.cycle_spacing_hours);
    s.get("histogram_bin_width", c.eval.histogram_bin_width);
    s.get("histogram_max", c.eval.histogram_max);
    s.finish();
  }

  if (const json* sd = root.child("seeds")) {
    Section s(*sd, "seeds");
    s.get("terrain", c.seeds.terrain);
    s.get("stations", c.seeds.stations);
    s.get("network", c.seeds.network);
    s.get("eval", c.seeds.eval);
    s.finish();
  }

  if (const json* p = root.child("paths")) {
    Section s(*p, "paths");
    std::string out;
    s.get("output_dir", out);
    if (!out.empty()) c.paths.output_dir = out;
    s.finish();
  }

  root.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json events = json::array();
  for (const EventConfig& e : scenario.events) {
    events.push_back({{"id", e.id}, {"seed", e.seed}, {"vortex", vortex_json(e.vortex)}, {"bias", bias_json(e.bias)}});
  }
  json risk_j = risk.to_json();
  risk_j["fragility"] = fragility.to_json();
  return {
      {"grids",
       {{"lon_min", grids.lon_min},
        {"lon_max", grids.lon_max},
        {"lat_min", grids.lat_min},
        {"lat_max", grids.lat_max},
        {"coarse_res", grids.coarse_res},
        {"fine_res", grids.fine_res}}},
      {"scenario",
       {{"start", format_utc(scenario.start)},
        {"hours", scenario.hours},
        {"k_tpi", scenario.k_tpi},
        {"k_rough", scenario.k_rough},
        {"truth_coupling", to_string(scenario.coupling)},
        {"terrain", terrain_params_json(scenario.terrain)},
        {"tpi_radius_cells", scenario.tpi_radius_cells},
        {"stations", scenario.stations},
        {"network", {{"lines", scenario.lines}, {"towers_per_line", scenario.towers_per_line}, {"span_km", scenario.span_km}}},
        {"events", events}}},
      {"corrector",
       {{"history", corrector.history},
        {"horizon", corrector.horizon},
        {"cycle_spacing_hours", corrector.cycle_spacing_hours},
        {"alpha", corrector.fit.alpha},
        {"max_iters", corrector.fit.max_iters},
        {"step_size", corrector.fit.step_size},
        {"tolerance", corrector.fit.tolerance},
        {"max_halvings", corrector.fit.max_halvings}}},
      {"downscaler", downscaler.to_json()},
      {"risk", risk_j},
      {"eval",
       {{"val_fraction", eval.val_fraction},
        {"high_wind", eval.high_wind},
        {"cycle_spacing_hours", eval.cycle_spacing_hours},
        {"histogram_bin_width", eval.histogram_bin_width},
        {"histogram_max", eval.histogram_max}}},
      {"seeds", {{"terrain", seeds.terrain}, {"stations", seeds.stations}, {"network", seeds.network}, {"eval", seeds.eval}}},
      {"paths", {{"output_dir", paths.output_dir.string()}}},
  };
}

GridSpec RunConfig::coarse_grid() const {
  return GridSpec::from_bounds(grids.lon_min, grids.lon_max, grids.lat_min, grids.lat_max, grids.coarse_res);
}

GridSpec RunConfig::fine_grid() const {
  return GridSpec::from_bounds(grids.lon_min, grids.lon_max, grids.lat_min, grids.lat_max, grids.fine_res);
}

RegionParams RunConfig::region_params() const {
  RegionParams p;
  p.coarse = coarse_grid();
  p.fine = fine_grid();
  p.terrain = scenario.terrain;
  p.tpi_radius_cells = scenario.tpi_radius_cells;
  p.stations = scenario.stations;
  p.lines = scenario.lines;
  p.towers_per_line = scenario.towers_per_line;
  p.span_km = scenario.span_km;
  p.terrain_seed = seeds.terrain;
  p.station_seed = seeds.stations;
  p.network_seed = seeds.network;
  return p;
}

void RunConfig::validate() const {
  // Each check is rethrown as a ConfigError naming its section.
  auto section = [](const std::string& name, auto&& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(name + ": " + e.what());
    }
  };
  section("grids", [&] { refinement_ratio(coarse_grid(), fine_grid()); });
  section("scenario.terrain", [&] { scenario.terrain.validate(); });
  if (scenario.tpi_radius_cells < 1) throw ConfigError("scenario.tpi_radius_cells must be >= 1");
  if (scenario.stations < 1) throw ConfigError("scenario.stations must be >= 1");
  if (scenario.lines < 1 || scenario.towers_per_line < 2 || !(scenario.span_km > 0.0)) {
    throw ConfigError("scenario.network needs >= 1 line, >= 2 towers per line and a positive span_km");
  }
  if (!(scenario.k_tpi >= 0.0) || !(scenario.k_rough >= 0.0)) {
    throw ConfigError("scenario.k_tpi and scenario.k_rough must be non-negative");
  }
  if (scenario.events.empty()) throw ConfigError("scenario.events must list at least one event");
  if (corrector.history < 1 || corrector.horizon < 1) {
    throw ConfigError("corrector.history and corrector.horizon must be >= 1");
  }
  if (scenario.hours < static_cast<std::size_t>(corrector.history + corrector.horizon)) {
    throw ConfigError("scenario.hours must cover at least history + horizon hours");
  }
  const TimePoint last = scenario.start + static_cast<long>(scenario.hours - 1) * kHour;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < scenario.events.size(); ++i) {
    const EventConfig& e = scenario.events[i];
    const std::string path = "scenario.events[" + std::to_string(i) + "]";
    if (!safe_id(e.id)) throw ConfigError(path + ".id must be 1-64 characters of [A-Za-z0-9_-]");
    if (!ids.insert(e.id).second) throw ConfigError(path + ".id '" + e.id + "' is duplicated");
    section(path + ".vortex", [&] { e.vortex.validate(); });
    section(path + ".bias", [&] { e.bias.validate(); });
    if (e.vortex.track.front().time > scenario.start || e.vortex.track.back().time < last) {
      throw ConfigError(path + ".vortex.track must cover every scenario hour");
    }
  }
  if (corrector.cycle_spacing_hours < 1 || eval.cycle_spacing_hours < 1) {
    throw ConfigError("cycle spacing must be >= 1 hour");
  }
  if (!(corrector.fit.alpha >= 0.0) || corrector.fit.max_iters < 1 || !(corrector.fit.step_size > 0.0) ||
      !(corrector.fit.tolerance >= 0.0) || corrector.fit.max_halvings < 0) {
    throw ConfigError("corrector needs alpha >= 0, max_iters >= 1, step_size > 0, tolerance >= 0, max_halvings >= 0");
  }
  if (!(downscaler.patch_deg > 0.0) || !(downscaler.stride_deg > 0.0) || !(downscaler.ridge_lambda > 0.0)) {
    throw ConfigError("downscaler patch_deg, stride_deg and ridge_lambda must be positive");
  }
  section("risk", [&] { risk.validate(); });
  section("risk.fragility", [&] { fragility.validate(); });
  if (!(eval.val_fraction >= 0.0 && eval.val_fraction < 1.0)) throw ConfigError("eval.val_fraction must lie in [0, 1)");
  if (!(eval.high_wind > 0.0)) throw ConfigError("eval.high_wind must be positive");
  if (!(eval.histogram_bin_width > 0.0) || !(eval.histogram_max > eval.histogram_bin_width)) {
    throw ConfigError("eval histogram needs bin_width > 0 and max > bin_width");
  }
  if (paths.output_dir.empty()) throw ConfigError("paths.output_dir must not be empty");
}

}  // namespace acdf
