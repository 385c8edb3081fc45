#include "acdf/grid.hpp"

#include <cmath>
#include <string>

#include "acdf/errors.hpp"

namespace acdf {

const std::array<const char*, kTerrainFeatureCount> kTerrainFeatureNames = {
    "elevation_norm", "tpi", "slope_east", "slope_north", "roughness"};

namespace {

std::string describe(const GridSpec& s) {
  return "[" + std::to_string(s.lon_min) + ", " + std::to_string(s.lon_max) + "] x [" +
         std::to_string(s.lat_min) + ", " + std::to_string(s.lat_max) + "] @ " +
         std::to_string(s.cell_size);
}

bool near(double a, double b) { return std::abs(a - b) <= kCoordTolerance; }

}  // namespace

GridSpec GridSpec::from_bounds(double lon_min, double lon_max, double lat_min, double lat_max,
                               double cell_size) {
  GridSpec s;
  s.lon_min = lon_min;
  s.lon_max = lon_max;
  s.lat_min = lat_min;
  s.lat_max = lat_max;
  s.cell_size = cell_size;
  if (!(cell_size > 0.0)) throw InvalidArgumentError("cell_size must be positive");
  s.nx = static_cast<int>(std::lround((lon_max - lon_min) / cell_size)) + 1;
  s.ny = static_cast<int>(std::lround((lat_max - lat_min) / cell_size)) + 1;
  s.validate();
  return s;
}

void GridSpec::validate() const {
  if (!(cell_size > 0.0)) throw InvalidArgumentError("cell_size must be positive");
  if (!(lon_max > lon_min) || !(lat_max > lat_min)) {
    throw InvalidArgumentError("grid bounds must satisfy max > min: " + describe(*this));
  }
  if (nx != std::lround((lon_max - lon_min) / cell_size) + 1 ||
      ny != std::lround((lat_max - lat_min) / cell_size) + 1) {
    throw InvalidArgumentError("node counts inconsistent with bounds: " + describe(*this));
  }
  // Node-registered: the last node must land on the upper bound.
  if (std::abs(lon(nx - 1) - lon_max) > 1e-6 * cell_size + kCoordTolerance ||
      std::abs(lat(ny - 1) - lat_max) > 1e-6 * cell_size + kCoordTolerance) {
    throw InvalidArgumentError("extent is not a whole number of cells: " + describe(*this));
  }
}

bool GridSpec::contains(double lat, double lon) const {
  return lon >= lon_min - kCoordTolerance && lon <= lon_max + kCoordTolerance &&
         lat >= lat_min - kCoordTolerance && lat <= lat_max + kCoordTolerance;
}

double GridSpec::x_of(double lon) const {
  const double x = (lon - lon_min) / cell_size;
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

double GridSpec::y_of(double lat) const {
  const double y = (lat - lat_min) / cell_size;
  const double r = std::round(y);
  return std::abs(y - r) < 1e-9 ? r : y;
}

bool GridSpec::same_bounds(const GridSpec& o) const {
  return near(lon_min, o.lon_min) && near(lon_max, o.lon_max) && near(lat_min, o.lat_min) &&
         near(lat_max, o.lat_max);
}

bool GridSpec::same_geometry(const GridSpec& o) const {
  return same_bounds(o) && near(cell_size, o.cell_size) && nx == o.nx && ny == o.ny;
}

WindField::WindField(GridSpec s, std::vector<TimePoint> t)
    : spec(s), times(std::move(t)), data(times.size() * s.node_count() * 2, 0.0) {}

WindField WindField::time_window(std::size_t begin, std::size_t count) const {
  if (begin + count > times.size()) {
    throw ShapeError("time window [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") exceeds " +
                     std::to_string(times.size()) + " timesteps");
  }
  WindField out(spec, std::vector<TimePoint>(times.begin() + static_cast<long>(begin),
                                             times.begin() + static_cast<long>(begin + count)));
  const auto first = data.begin() + static_cast<long>(begin * slice_size());
  std::copy(first, first + static_cast<long>(count * slice_size()), out.data.begin());
  return out;
}

void WindField::validate() const {
  spec.validate();
  if (data.size() != times.size() * slice_size()) {
    throw ShapeError("wind field payload has " + std::to_string(data.size()) +
                     " values, expected " + std::to_string(times.size() * slice_size()));
  }
  if (!is_hourly(times)) throw InvalidArgumentError("wind field times must be hourly and increasing");
  for (std::size_t k = 0; k < data.size(); k += 2) {
    const double u = data[k], v = data[k + 1];
    if (!std::isfinite(u) || !std::isfinite(v)) throw InvalidArgumentError("non-finite wind value");
    if (std::hypot(u, v) > kMaxWindSpeed) {
      throw InvalidArgumentError("wind speed exceeds " + std::to_string(kMaxWindSpeed) + " m/s");
    }
  }
}

StationSeries StationSeries::time_window(std::size_t begin, std::size_t count) const {
  if (begin + count > times.size()) throw ShapeError("station time window out of range");
  StationSeries out;
  out.stations = stations;
  out.times.assign(times.begin() + static_cast<long>(begin),
                   times.begin() + static_cast<long>(begin + count));
  const std::size_t stride = stations.size() * 2;
  out.data.assign(data.begin() + static_cast<long>(begin * stride),
                  data.begin() + static_cast<long>((begin + count) * stride));
  return out;
}

double roughness_of(LandCover cls) {
  switch (cls) {
    case LandCover::kWater: return 0.0;
    case LandCover::kCropland: return 0.25;
    case LandCover::kForest: return 0.6;
    case LandCover::kUrban: return 1.0;
  }
  throw InvalidArgumentError("unknown land-cover class");
}

TerrainGrid::TerrainGrid(GridSpec s)
    : spec(s), elevation(s.node_count(), 0.0), roughness_class(s.node_count(), 0) {}

void TerrainGrid::validate() const {
  spec.validate();
  if (elevation.size() != spec.node_count() || roughness_class.size() != spec.node_count()) {
    throw ShapeError("terrain arrays do not match the grid");
  }
  for (double e : elevation) {
    if (!std::isfinite(e)) throw InvalidArgumentError("non-finite elevation");
  }
  for (auto c : roughness_class) {
    if (c >= kLandCoverCount) throw InvalidArgumentError("roughness class outside 0..3");
  }
}

TerrainFeatures::TerrainFeatures(GridSpec s)
    : spec(s), data(s.node_count() * kTerrainFeatureCount, 0.0) {}

}  // namespace acdf
