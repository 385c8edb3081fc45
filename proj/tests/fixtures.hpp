#pragma once

#include <string>

#include "acdf/scenario.hpp"

namespace acdf::testing {

inline const TimePoint kStart = parse_utc("2021-07-20T00:00:00Z");

inline RegionParams small_region_params(std::size_t stations = 24) {
  RegionParams p;
  p.coarse = GridSpec::from_bounds(118.0, 119.0, 28.0, 28.75, 0.125);
  p.fine = GridSpec::from_bounds(118.0, 119.0, 28.0, 28.75, 0.005);
  p.terrain.hills = 5;
  p.terrain.ridges = 3;
  p.terrain.urban_patches = 1;
  p.tpi_radius_cells = 8;
  p.stations = stations;
  p.lines = 3;
  p.towers_per_line = 8;
  return p;
}

/// Storm crossing the small region from south-east to north-west.
inline EventSpec crossing_storm(const std::string& id, std::size_t hours, double lon_shift, BiasModel bias,
                                std::uint64_t seed) {
  EventSpec e;
  e.id = id;
  e.vortex.v_max = 38.0;
  e.vortex.r_max_km = 25.0;
  e.vortex.track = {{kStart, 27.9, 119.1 + lon_shift},
                    {kStart + static_cast<long>(hours) * kHour, 28.9, 118.0 + lon_shift}};
  e.bias = bias;
  e.seed = seed;
  return e;
}

}  // namespace acdf::testing
