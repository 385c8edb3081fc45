#include "acdf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "acdf/errors.hpp"
#include "acdf/hashing.hpp"
#include "acdf/parallel.hpp"
#include "acdf/resample.hpp"
#include "acdf/terrain.hpp"

namespace acdf {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kKmPerDegree = kMetersPerDegree / 1000.0;

struct CentreState {
  double lat, lon;
  double u_translation, v_translation;  // m/s
};

CentreState centre_at(const VortexParams& p, TimePoint t) {
  const auto& track = p.track;
  if (t < track.front().time || t > track.back().time) {
    throw ExtrapolationError("time " + format_utc(t) + " is outside the vortex track span");
  }
  std::size_t seg = 0;
  while (seg + 2 < track.size() && t >= track[seg + 1].time) ++seg;
  const TrackPoint& a = track[seg];
  const TrackPoint& b = track[seg + 1];
  const double span_s = static_cast<double>((b.time - a.time).count());
  const double w = static_cast<double>((t - a.time).count()) / span_s;
  CentreState c;
  c.lat = (1.0 - w) * a.lat + w * b.lat;
  c.lon = (1.0 - w) * a.lon + w * b.lon;
  c.u_translation = 0.0;
  c.v_translation = 0.0;
  if (p.add_translation) {
    c.u_translation = (b.lon - a.lon) * kMetersPerDegree * std::cos(c.lat * kDeg) / span_s;
    c.v_translation = (b.lat - a.lat) * kMetersPerDegree / span_s;
  }
  return c;
}

std::array<double, 2> vortex_wind(const VortexParams& p, const CentreState& c, double lat, double lon) {
  const double east_km = (lon - c.lon) * kKmPerDegree * std::cos(c.lat * kDeg);
  const double north_km = (lat - c.lat) * kKmPerDegree;
  const double r = std::hypot(east_km, north_km);
  std::array<double, 2> w{c.u_translation, c.v_translation};
  if (r > 0.0) {
    const double s = vortex_speed(p, r);
    w[0] += -s * north_km / r;
    w[1] += s * east_km / r;
  }
  return w;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

void VortexParams::validate() const {
  if (!(v_max > 0.0)) throw InvalidArgumentError("vortex v_max must be positive");
  if (!(r_max_km > 0.0)) throw InvalidArgumentError("vortex r_max must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgumentError("vortex decay must lie in (0, 1]");
  if (track.size() < 2) throw InvalidArgumentError("vortex track needs at least two points");
  for (std::size_t i = 1; i < track.size(); ++i) {
    if (!(track[i].time > track[i - 1].time)) {
      throw InvalidArgumentError("vortex track times must be strictly increasing");
    }
  }
}

double vortex_speed(const VortexParams& p, double r_km) {
  if (r_km < p.r_max_km) return p.v_max * r_km / p.r_max_km;
  return p.v_max * std::pow(p.r_max_km / r_km, p.decay);
}

std::array<double, 2> vortex_wind_at(const VortexParams& params, double lat, double lon, TimePoint t) {
  params.validate();
  return vortex_wind(params, centre_at(params, t), lat, lon);
}

WindField generate_vortex(const VortexParams& params, const GridSpec& spec,
                          const std::vector<TimePoint>& times) {
  params.validate();
  std::vector<CentreState> centres;
  centres.reserve(times.size());
  for (TimePoint t : times) centres.push_back(centre_at(params, t));
  WindField out(spec, times);
  parallel_for(times.size(), [&](std::size_t t) {
    for (int y = 0; y < spec.ny; ++y) {
      for (int x = 0; x < spec.nx; ++x) {
        const auto w = vortex_wind(params, centres[t], spec.lat(y), spec.lon(x));
        out.at(t, y, x, 0) = w[0];
        out.at(t, y, x, 1) = w[1];
      }
    }
  });
  return out;
}

double terrain_speed_factor(double tpi, double roughness, double k_tpi, double k_rough) {
  return std::clamp(1.0 + k_tpi * tpi / 100.0 - k_rough * roughness, 0.2, 2.0);
}

WindField terrain_modulate(const WindField& field, const TerrainFeatures& features, double k_tpi,
                           double k_rough) {
  if (!features.spec.same_geometry(field.spec)) {
    throw AlignmentError("terrain features and wind field are on different grids");
  }
  WindField out = field;
  const GridSpec& spec = field.spec;
  for (std::size_t t = 0; t < field.time_count(); ++t) {
    for (int y = 0; y < spec.ny; ++y) {
      for (int x = 0; x < spec.nx; ++x) {
        const double f = terrain_speed_factor(features.at(y, x, kFeatTpi),
                                              features.at(y, x, kFeatRoughness), k_tpi, k_rough);
        out.at(t, y, x, 0) *= f;
        out.at(t, y, x, 1) *= f;
      }
    }
  }
  return out;
}

void BiasModel::validate() const {
  if (!(gain > 0.0)) throw InvalidArgumentError("bias gain must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidArgumentError("bias noise sigma must be non-negative");
}

WindField apply_bias(const WindField& truth, const BiasModel& model, std::uint64_t seed) {
  model.validate();
  const GridSpec& spec = truth.spec;
  WindField out(spec, truth.times);
  const bool displaced = model.displacement_lat != 0.0 || model.displacement_lon != 0.0;
  parallel_for(truth.time_count(), [&](std::size_t t) {
    std::mt19937_64 rng(mix_seed(seed, t));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int y = 0; y < spec.ny; ++y) {
      for (int x = 0; x < spec.nx; ++x) {
        double u = truth.at(t, y, x, 0), v = truth.at(t, y, x, 1);
        if (displaced) {
          const double lat = std::clamp(spec.lat(y) - model.displacement_lat, spec.lat_min, spec.lat_max);
          const double lon = std::clamp(spec.lon(x) - model.displacement_lon, spec.lon_min, spec.lon_max);
          const auto w = sample_at(truth, lat, lon, t);
          u = w[0];
          v = w[1];
        }
        const double s = std::hypot(u, v);
        if (s > 0.0) {
          const double factor = std::max(0.0, model.gain * s + model.offset) / s;
          u *= factor;
          v *= factor;
        }
        if (model.noise_sigma > 0.0) {
          u += model.noise_sigma * noise(rng);
          v += model.noise_sigma * noise(rng);
        }
        out.at(t, y, x, 0) = u;
        out.at(t, y, x, 1) = v;
      }
    }
  });
  return out;
}

std::vector<Station> place_stations(const GridSpec& spec, std::size_t n_stations, std::uint64_t seed) {
  if (n_stations < 1) throw InvalidArgumentError("at least one station is required");
  std::mt19937_64 rng(seed);
  std::vector<Station> out;
  out.reserve(n_stations);
  for (std::size_t i = 0; i < n_stations; ++i) {
    Station s;
    char buf[32];
    std::snprintf(buf, sizeof buf, "ST%04zu", i + 1);
    s.id = buf;
    s.lon = uniform(rng, spec.lon_min, spec.lon_max);
    s.lat = uniform(rng, spec.lat_min, spec.lat_max);
    out.push_back(std::move(s));
  }
  return out;
}

StationSeries sample_stations(const WindField& truth_fine, const std::vector<Station>& stations) {
  StationSeries out;
  out.stations = stations;
  out.times = truth_fine.times;
  out.data.resize(truth_fine.time_count() * stations.size() * 2);
  for (std::size_t s = 0; s < stations.size(); ++s) {
    const BilinearStencil st = bilinear_stencil(truth_fine.spec, stations[s].lat, stations[s].lon);
    for (std::size_t t = 0; t < truth_fine.time_count(); ++t) {
      for (int c = 0; c < 2; ++c) {
        out.at(t, s, c) = st.apply([&](int y, int x) { return truth_fine.at(t, y, x, c); });
      }
    }
  }
  return out;
}

StationSeries sample_stations(const WindField& truth_fine, std::size_t n_stations, std::uint64_t seed) {
  return sample_stations(truth_fine, place_stations(truth_fine.spec, n_stations, seed));
}

Network generate_network(const GridSpec& spec, int n_lines, int towers_per_line, double span_km,
                         std::uint64_t seed) {
  if (n_lines < 1 || towers_per_line < 2 || !(span_km > 0.0)) {
    throw InvalidArgumentError("network needs >= 1 line, >= 2 towers per line and a positive span");
  }
  const double margin = 0.02 * std::min(spec.lon_max - spec.lon_min, spec.lat_max - spec.lat_min);
  auto inside = [&](double lat, double lon) {
    return lat > spec.lat_min + margin && lat < spec.lat_max - margin && lon > spec.lon_min + margin &&
           lon < spec.lon_max - margin;
  };
  Network network;
  for (int l = 0; l < n_lines; ++l) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(l)));
    std::vector<LatLon> points;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      points.clear();
      points.push_back({uniform(rng, spec.lat_min + margin, spec.lat_max - margin),
                        uniform(rng, spec.lon_min + margin, spec.lon_max - margin)});
      double heading = uniform(rng, 0.0, 360.0);
      std::normal_distribution<double> turn(0.0, 20.0);
      placed = true;
      for (int k = 1; k < towers_per_line && placed; ++k) {
        bool stepped = false;
        for (int trial = 0; trial < 64 && !stepped; ++trial) {
          const double h = trial == 0 ? heading + turn(rng) : uniform(rng, 0.0, 360.0);
          const LatLon& p = points.back();
          const double lat = p.lat + span_km * std::cos(h * kDeg) / kKmPerDegree;
          const double lon = p.lon + span_km * std::sin(h * kDeg) / (kKmPerDegree * std::cos(p.lat * kDeg));
          if (inside(lat, lon)) {
            points.push_back({lat, lon});
            heading = h;
            stepped = true;
          }
        }
        placed = stepped;
      }
    }
    if (!placed) throw InvalidArgumentError("transmission lines do not fit inside the grid");
    char buf[32];
    std::snprintf(buf, sizeof buf, "L%03d", l + 1);
    add_line(network, buf, points);
  }
  return network;
}

void TerrainSynthParams::validate() const {
  if (hills < 0 || ridges < 0 || urban_patches < 0) throw InvalidArgumentError("terrain feature counts must be >= 0");
  if (hill_height_min > hill_height_max || hill_radius_km_min > hill_radius_km_max ||
      ridge_height_min > ridge_height_max || ridge_length_km_min > ridge_length_km_max ||
      ridge_width_km_min > ridge_width_km_max || !(hill_radius_km_min > 0.0) || !(ridge_width_km_min > 0.0)) {
    throw InvalidArgumentError("terrain parameter ranges must satisfy min <= max with positive widths");
  }
  if (!(sea_fraction >= 0.0 && sea_fraction < 1.0)) throw InvalidArgumentError("sea_fraction must lie in [0, 1)");
}

TerrainGrid synthesize_terrain(const GridSpec& spec, const TerrainSynthParams& p, std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(seed);
  const double width_km = (spec.lon_max - spec.lon_min) * kKmPerDegree *
                          std::cos(0.5 * (spec.lat_min + spec.lat_max) * kDeg);
  const double height_km = (spec.lat_max - spec.lat_min) * kKmPerDegree;
  const double coast_km = (1.0 - p.sea_fraction) * width_km;

  struct Bump {
    double x, y, height, along, across, angle;
  };
  std::vector<Bump> bumps;
  for (int i = 0; i < p.hills; ++i) {
    const double r = uniform(rng, p.hill_radius_km_min, p.hill_radius_km_max);
    bumps.push_back({uniform(rng, 0.0, coast_km), uniform(rng, 0.0, height_km),
                     uniform(rng, p.hill_height_min, p.hill_height_max), r, r, 0.0});
  }
  for (int i = 0; i < p.ridges; ++i) {
    bumps.push_back({uniform(rng, 0.0, coast_km), uniform(rng, 0.0, height_km),
                     uniform(rng, p.ridge_height_min, p.ridge_height_max),
                     0.5 * uniform(rng, p.ridge_length_km_min, p.ridge_length_km_max),
                     uniform(rng, p.ridge_width_km_min, p.ridge_width_km_max), uniform(rng, 0.0, 180.0)});
  }
  struct Disk {
    double x, y;
  };
  std::vector<Disk> towns;
  for (int i = 0; i < p.urban_patches; ++i) {
    towns.push_back({uniform(rng, 0.0, coast_km), uniform(rng, 0.0, height_km)});
  }
  const double wiggle_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  TerrainGrid out(spec);
  const double dx = cell_width_m(spec) / 1000.0, dy = cell_height_m(spec) / 1000.0;
  for (int y = 0; y < spec.ny; ++y) {
    for (int x = 0; x < spec.nx; ++x) {
      const double xk = x * dx, yk = y * dy;
      const std::size_t cell = static_cast<std::size_t>(y) * spec.nx + x;
      const double coast = coast_km + 0.04 * width_km * std::sin(2.0 * std::numbers::pi * yk / height_km + wiggle_phase);
      if (p.sea_fraction > 0.0 && xk > coast) {
        out.elevation[cell] = 0.0;
        out.roughness_class[cell] = static_cast<std::uint8_t>(LandCover::kWater);
        continue;
      }
      double z = 5.0;
      for (const Bump& b : bumps) {
        const double c = std::cos(b.angle * kDeg), s = std::sin(b.angle * kDeg);
        const double ex = xk - b.x, ey = yk - b.y;
        const double a = (ex * c + ey * s) / b.along, q = (-ex * s + ey * c) / b.across;
        z += b.height * std::exp(-0.5 * (a * a + q * q));
      }
      // Taper towards the shoreline so the coast stays low.
      if (p.sea_fraction > 0.0) z *= std::min(1.0, std::max(0.0, (coast - xk) / 8.0));
      out.elevation[cell] = z;
      LandCover cls = z < 2.0 ? LandCover::kWater : (z < 120.0 ? LandCover::kCropland : LandCover::kForest);
      if (z < 80.0) {
        for (const Disk& d : towns) {
          if (std::hypot(xk - d.x, yk - d.y) < p.urban_radius_km) cls = LandCover::kUrban;
        }
      }
      out.roughness_class[cell] = static_cast<std::uint8_t>(cls);
    }
  }
  return out;
}

Region build_region(const RegionParams& params) {
  Region r;
  r.coarse = params.coarse;
  r.fine = params.fine;
  refinement_ratio(r.coarse, r.fine);
  r.terrain = synthesize_terrain(r.fine, params.terrain, params.terrain_seed);
  r.features = terrain_features(r.terrain, params.tpi_radius_cells);
  r.stations = place_stations(r.fine, params.stations, params.station_seed);
  r.network = generate_network(r.fine, params.lines, params.towers_per_line, params.span_km, params.network_seed);
  return r;
}

SyntheticEvent build_event(const Region& region, const EventSpec& spec, const ScenarioTiming& timing,
                           double k_tpi, double k_rough, TruthCoupling coupling) {
  SyntheticEvent e;
  e.id = spec.id;
  const auto times = hourly_times(timing.start, timing.hours);
  if (coupling == TruthCoupling::kBlockMean) {
    e.truth_fine = terrain_modulate(generate_vortex(spec.vortex, region.fine, times), region.features, k_tpi, k_rough);
    e.truth_coarse = block_mean(e.truth_fine, region.coarse);
  } else {
    e.truth_coarse = generate_vortex(spec.vortex, region.coarse, times);
    e.truth_fine = terrain_modulate(bilinear_resample(e.truth_coarse, region.fine), region.features, k_tpi, k_rough);
  }
  e.forecast_coarse = apply_bias(e.truth_coarse, spec.bias, spec.seed);
  e.stations = sample_stations(e.truth_fine, region.stations);
  return e;
}

std::string to_string(TruthCoupling c) {
  return c == TruthCoupling::kBlockMean ? "block_mean" : "modulated_upsample";
}

TruthCoupling truth_coupling_from_string(const std::string& s) {
  if (s == "block_mean") return TruthCoupling::kBlockMean;
  if (s == "modulated_upsample") return TruthCoupling::kModulatedUpsample;
  throw InvalidArgumentError("unknown truth coupling '" + s + "'");
}

}  // namespace acdf
