#include <cmath>
#include <numbers>

#include "acdf/errors.hpp"
#include "acdf/resample.hpp"
#include "acdf/scenario.hpp"
#include "acdf/terrain.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace acdf;
using acdf::testing::kStart;

namespace {

VortexParams stationary(double lat, double lon) {
  VortexParams p;
  p.v_max = 40.0;
  p.r_max_km = 30.0;
  p.decay = 0.5;
  p.track = {{kStart, lat, lon}, {kStart + 6 * kHour, lat, lon}};
  return p;
}

// Point at distance r_km due north of the centre.
double north_of(double lat, double r_km) { return lat + r_km * 1000.0 / kMetersPerDegree; }

WindField uniform_field(const GridSpec& spec, std::size_t hours, double u, double v) {
  WindField f(spec, hourly_times(kStart, hours));
  for (std::size_t i = 0; i < f.data.size(); i += 2) {
    f.data[i] = u;
    f.data[i + 1] = v;
  }
  return f;
}

}  // namespace

TEST_CASE("vortex profile") {
  const VortexParams p = stationary(28.0, 120.0);
  const auto at_rmax = vortex_wind_at(p, north_of(28.0, 30.0), 120.0, kStart);
  CHECK(std::hypot(at_rmax[0], at_rmax[1]) == doctest::Approx(40.0).epsilon(1e-9));
  // Counter-clockwise: due north of the centre the wind blows towards the west.
  CHECK(at_rmax[0] < 0.0);
  CHECK(std::abs(at_rmax[1]) < 1e-9);

  const auto at_2r = vortex_wind_at(p, north_of(28.0, 60.0), 120.0, kStart + 2 * kHour);
  CHECK(std::hypot(at_2r[0], at_2r[1]) == doctest::Approx(40.0 / std::sqrt(2.0)).epsilon(1e-9));

  // Continuity at r_max and the maximum along a ray.
  CHECK(vortex_speed(p, 30.0 - 1e-9) == doctest::Approx(vortex_speed(p, 30.0 + 1e-9)).epsilon(1e-9));
  double best_r = 0.0, best = -1.0;
  for (double r = 0.5; r < 200.0; r += 0.5) {
    if (vortex_speed(p, r) > best) {
      best = vortex_speed(p, r);
      best_r = r;
    }
  }
  CHECK(best_r == doctest::Approx(30.0));

  // Centre-symmetric pairs carry opposite vectors.
  for (double d : {0.05, 0.13, 0.4}) {
    const auto a = vortex_wind_at(p, 28.0 + d, 120.0 + 0.7 * d, kStart);
    const auto b = vortex_wind_at(p, 28.0 - d, 120.0 - 0.7 * d, kStart);
    CHECK(a[0] == doctest::Approx(-b[0]).epsilon(1e-9));
    CHECK(a[1] == doctest::Approx(-b[1]).epsilon(1e-9));
  }

  CHECK_THROWS_AS(vortex_wind_at(p, 28.0, 120.0, kStart + 7 * kHour), ExtrapolationError);
  CHECK_THROWS_AS(vortex_wind_at(p, 28.0, 120.0, kStart - kHour), ExtrapolationError);
  VortexParams bad = p;
  bad.decay = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgumentError);
  bad = p;
  bad.track[1].time = bad.track[0].time;
  CHECK_THROWS_AS(bad.validate(), InvalidArgumentError);
}

TEST_CASE("moving vortex adds the translation velocity") {
  VortexParams p = stationary(28.0, 120.0);
  p.track[1].lat = 28.0 + 0.5;  // 0.5 deg north in 6 h
  const double vt = 0.5 * kMetersPerDegree / (6.0 * 3600.0);
  // At the instantaneous centre the tangential part vanishes.
  const auto c = vortex_wind_at(p, 28.25, 120.0, kStart + 3 * kHour);
  CHECK(c[0] == doctest::Approx(0.0));
  CHECK(c[1] == doctest::Approx(vt).epsilon(1e-9));
  p.add_translation = false;
  const auto s = vortex_wind_at(p, 28.25, 120.0, kStart + 3 * kHour);
  CHECK(std::hypot(s[0], s[1]) == doctest::Approx(0.0));
}

TEST_CASE("terrain modulation factor") {
  CHECK(terrain_speed_factor(0.0, 0.0, 0.3, 0.2) == 1.0);
  CHECK(terrain_speed_factor(100.0, 0.0, 0.3, 0.0) == doctest::Approx(1.3));
  CHECK(terrain_speed_factor(-500.0, 0.0, 0.3, 0.0) == 0.2);
  CHECK(terrain_speed_factor(900.0, 0.0, 0.3, 0.0) == 2.0);

  const GridSpec g = GridSpec::from_bounds(118.0, 118.1, 28.0, 28.1, 0.005);
  TerrainFeatures flat(g);
  const WindField f = uniform_field(g, 2, 3.0, -4.0);
  const WindField same = terrain_modulate(f, flat, 0.3, 0.2);
  CHECK(same.data == f.data);

  TerrainFeatures bumped(g);
  bumped.at(4, 6, kFeatTpi) = 100.0;
  const WindField m = terrain_modulate(f, bumped, 0.3, 0.0);
  CHECK(m.at(1, 4, 6, 0) == doctest::Approx(3.9));
  CHECK(m.at(1, 4, 6, 1) == doctest::Approx(-5.2));
  CHECK(m.at(1, 4, 7, 0) == 3.0);

  const GridSpec other = GridSpec::from_bounds(118.0, 118.2, 28.0, 28.1, 0.005);
  CHECK_THROWS_AS(terrain_modulate(uniform_field(other, 1, 1.0, 1.0), flat, 0.3, 0.2), AlignmentError);
}

TEST_CASE("forecast bias") {
  const GridSpec g = GridSpec::from_bounds(118.0, 119.0, 28.0, 29.0, 0.125);
  const WindField east = uniform_field(g, 3, 20.0, 0.0);

  const WindField same = apply_bias(east, BiasModel{}, 5);
  CHECK(same.data == east.data);

  BiasModel weak;
  weak.gain = 0.8;
  weak.offset = -1.0;
  const WindField w = apply_bias(east, weak, 5);
  for (std::size_t i = 0; i < w.data.size(); i += 2) {
    CHECK(w.data[i] == doctest::Approx(15.0));
    CHECK(w.data[i + 1] == doctest::Approx(0.0));
  }

  // Offset follows the local flow, so direction is kept.
  const WindField diag = uniform_field(g, 1, 6.0, 8.0);
  const WindField d = apply_bias(diag, weak, 1);
  CHECK(d.at(0, 2, 2, 0) == doctest::Approx(6.0 * 7.0 / 10.0));
  CHECK(d.at(0, 2, 2, 1) == doctest::Approx(8.0 * 7.0 / 10.0));

  BiasModel noisy;
  noisy.noise_sigma = 1.5;
  const WindField n1 = apply_bias(east, noisy, 42);
  const WindField n2 = apply_bias(east, noisy, 42);
  const WindField n3 = apply_bias(east, noisy, 43);
  CHECK(n1.data == n2.data);
  CHECK(n1.data != n3.data);

  // A displaced forecast reads the truth from upstream of the shift.
  WindField ramp(g, hourly_times(kStart, 1));
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) ramp.at(0, y, x, 0) = 10.0 + x;
  BiasModel shift;
  shift.displacement_lon = 0.25;
  const WindField s = apply_bias(ramp, shift, 0);
  CHECK(s.at(0, 3, 5, 0) == doctest::Approx(13.0));
  CHECK(s.at(0, 3, 0, 0) == doctest::Approx(10.0));  // clamped to the edge

  BiasModel bad;
  bad.gain = 0.0;
  CHECK_THROWS_AS(apply_bias(east, bad, 0), InvalidArgumentError);
}

TEST_CASE("station sampling") {
  const GridSpec g = GridSpec::from_bounds(118.0, 118.5, 28.0, 28.5, 0.05);
  WindField f(g, hourly_times(kStart, 3));
  for (std::size_t t = 0; t < 3; ++t)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        f.at(t, y, x, 0) = 1.0 + t + 0.3 * x - 0.2 * y;
        f.at(t, y, x, 1) = std::sin(0.7 * x + y + t);
      }
  const std::vector<Station> at_node{{"A", g.lat(4), g.lon(7)}};
  const StationSeries s = sample_stations(f, at_node);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(s.at(t, 0, 0) == doctest::Approx(f.at(t, 4, 7, 0)));
    CHECK(s.at(t, 0, 1) == doctest::Approx(f.at(t, 4, 7, 1)));
  }

  const StationSeries a = sample_stations(f, 12, 9);
  const StationSeries b = sample_stations(f, 12, 9);
  REQUIRE(a.stations.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.stations[i].lat == b.stations[i].lat);
    CHECK(a.stations[i].lon == b.stations[i].lon);
    CHECK(g.contains(a.stations[i].lat, a.stations[i].lon));
    for (std::size_t t = 0; t < 3; ++t) {
      const auto v = sample_at(f, a.stations[i].lat, a.stations[i].lon, t);
      CHECK(a.at(t, i, 0) == v[0]);
      CHECK(a.at(t, i, 1) == v[1]);
    }
  }
  CHECK(a.data == b.data);

  const StationSeries c = sample_stations(uniform_field(g, 2, 4.0, -1.0), 5, 3);
  for (std::size_t i = 0; i < c.data.size(); i += 2) {
    CHECK(c.data[i] == doctest::Approx(4.0));
    CHECK(c.data[i + 1] == doctest::Approx(-1.0));
  }
  CHECK_THROWS_AS(place_stations(g, 0, 1), InvalidArgumentError);
}

TEST_CASE("synthetic network") {
  const GridSpec g = GridSpec::from_bounds(118.0, 119.0, 28.0, 29.0, 0.005);
  const Network n = generate_network(g, 4, 9, 0.5, 11);
  CHECK(n.towers.size() == 36);
  CHECK(n.lines.size() == 4);
  n.validate();
  for (const Line& l : n.lines) {
    for (std::size_t k = 0; k + 1 < l.towers.size(); ++k) {
      const Tower& a = n.towers[l.towers[k]];
      const Tower& b = n.towers[l.towers[k + 1]];
      const double dy = (b.lat - a.lat) * kMetersPerDegree / 1000.0;
      const double dx = (b.lon - a.lon) * kMetersPerDegree / 1000.0 * std::cos(a.lat * std::numbers::pi / 180.0);
      CHECK(std::hypot(dx, dy) == doctest::Approx(0.5).epsilon(1e-6));
      CHECK(a.span_azimuth == doctest::Approx(bearing_deg(a.lat, a.lon, b.lat, b.lon)));
      CHECK(g.contains(a.lat, a.lon));
    }
    CHECK(n.towers[l.towers.back()].span_azimuth == n.towers[l.towers[l.towers.size() - 2]].span_azimuth);
  }
  const Network again = generate_network(g, 4, 9, 0.5, 11);
  CHECK(network_to_json(again) == network_to_json(n));

  Network east;
  add_line(east, "E", {{28.5, 118.2}, {28.5, 118.3}});
  CHECK(east.towers[0].span_azimuth == doctest::Approx(90.0));
  CHECK(east.towers[1].span_azimuth == doctest::Approx(90.0));
  CHECK_THROWS_AS(generate_network(g, 1, 1, 0.5, 1), InvalidArgumentError);
}

TEST_CASE("events over a region") {
  const Region region = build_region(acdf::testing::small_region_params());
  CHECK(region.terrain.spec.same_geometry(region.fine));
  double highest = 0.0;
  for (double z : region.terrain.elevation) highest = std::max(highest, z);
  CHECK(highest > 150.0);

  BiasModel bias;
  bias.gain = 0.85;
  bias.noise_sigma = 0.5;
  const EventSpec spec = acdf::testing::crossing_storm("E1", 6, 0.0, bias, 17);
  const SyntheticEvent e = build_event(region, spec, {kStart, 6}, 0.3, 0.2);
  CHECK(e.truth_fine.times == e.truth_coarse.times);
  CHECK(e.forecast_coarse.times == e.truth_coarse.times);
  CHECK(e.stations.times == e.truth_fine.times);

  const WindField agg = block_mean(e.truth_fine, region.coarse);
  CHECK(agg.data == e.truth_coarse.data);
  const StationSeries resampled = sample_stations(e.truth_fine, region.stations);
  CHECK(resampled.data == e.stations.data);

  const SyntheticEvent again = build_event(region, spec, {kStart, 6}, 0.3, 0.2);
  CHECK(again.truth_fine.data == e.truth_fine.data);
  CHECK(again.forecast_coarse.data == e.forecast_coarse.data);
  const Region region2 = build_region(acdf::testing::small_region_params());
  CHECK(region2.terrain.elevation == region.terrain.elevation);
  CHECK(network_to_json(region2.network) == network_to_json(region.network));

  // The alternative coupling refines the coarse vortex and then modulates it.
  const SyntheticEvent u = build_event(region, spec, {kStart, 6}, 0.3, 0.2, TruthCoupling::kModulatedUpsample);
  const WindField expect =
      terrain_modulate(bilinear_resample(generate_vortex(spec.vortex, region.coarse, u.truth_coarse.times), region.fine),
                       region.features, 0.3, 0.2);
  CHECK(u.truth_fine.data == expect.data);
  CHECK(truth_coupling_from_string(to_string(TruthCoupling::kModulatedUpsample)) == TruthCoupling::kModulatedUpsample);
  CHECK_THROWS_AS(truth_coupling_from_string("nearest"), InvalidArgumentError);
}
