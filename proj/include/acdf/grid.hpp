#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "acdf/time.hpp"

namespace acdf {

/// Small-angle planar conversion used throughout (mean Earth radius).
inline constexpr double kMetersPerDegree = 111195.0;

inline double wind_speed(double u, double v) { return std::hypot(u, v); }

/// Direction the air moves toward, degrees clockwise from north in [0, 360).
inline double wind_direction_deg(double u, double v) {
  const double d = std::atan2(u, v) * 180.0 / 3.14159265358979323846;
  return d < 0.0 ? d + 360.0 : (d >= 360.0 ? d - 360.0 : d);
}

/// Node-registered regular lon/lat grid. Node (i, j) sits at
/// (lon_min + i * cell_size, lat_min + j * cell_size); x grows eastward and
/// y grows northward.
struct GridSpec {
  double lon_min = 0.0;
  double lon_max = 0.0;
  double lat_min = 0.0;
  double lat_max = 0.0;
  double cell_size = 0.0;
  int nx = 0;
  int ny = 0;

  /// Derives nx and ny from the bounds; throws InvalidArgumentError when the
  /// bounds or cell size are inconsistent.
  static GridSpec from_bounds(double lon_min, double lon_max, double lat_min, double lat_max,
                              double cell_size);

  void validate() const;

  double lon(int i) const { return lon_min + i * cell_size; }
  double lat(int j) const { return lat_min + j * cell_size; }
  std::size_t node_count() const { return static_cast<std::size_t>(nx) * ny; }

  bool contains(double lat, double lon) const;
  /// Fractional node coordinates of a point; nodes are exactly integral.
  double x_of(double lon) const;
  double y_of(double lat) const;
  /// Same bounds and resolution, up to kCoordTolerance.
  bool same_geometry(const GridSpec& other) const;
  bool same_bounds(const GridSpec& other) const;
};

inline constexpr double kCoordTolerance = 1e-9;

/// Hourly gridded (u, v) wind in m/s, laid out [t][y][x][c] with c = 0 for
/// eastward u and c = 1 for northward v.
struct WindField {
  GridSpec spec;
  std::vector<TimePoint> times;
  std::vector<double> data;

  WindField() = default;
  WindField(GridSpec spec, std::vector<TimePoint> times);

  std::size_t time_count() const { return times.size(); }
  std::size_t slice_size() const { return spec.node_count() * 2; }
  std::size_t index(std::size_t t, int y, int x, int c) const {
    return ((t * spec.ny + y) * static_cast<std::size_t>(spec.nx) + x) * 2 + c;
  }
  double& at(std::size_t t, int y, int x, int c) { return data[index(t, y, x, c)]; }
  double at(std::size_t t, int y, int x, int c) const { return data[index(t, y, x, c)]; }

  /// Copy of the time range [begin, begin + count).
  WindField time_window(std::size_t begin, std::size_t count) const;

  /// Finite values, speeds <= kMaxWindSpeed and an hourly time axis.
  void validate() const;
};

inline constexpr double kMaxWindSpeed = 150.0;

struct Station {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
};

/// Point observations laid out [t][s][c].
struct StationSeries {
  std::vector<Station> stations;
  std::vector<TimePoint> times;
  std::vector<double> data;

  std::size_t index(std::size_t t, std::size_t s, int c) const {
    return (t * stations.size() + s) * 2 + c;
  }
  double at(std::size_t t, std::size_t s, int c) const { return data[index(t, s, c)]; }
  double& at(std::size_t t, std::size_t s, int c) { return data[index(t, s, c)]; }

  StationSeries time_window(std::size_t begin, std::size_t count) const;
};

/// Synthetic four-class land cover. The roughness scalar of kWater is zero so
/// that a flat sea-level water grid has an all-zero feature vector.
enum class LandCover : std::uint8_t { kWater = 0, kCropland = 1, kForest = 2, kUrban = 3 };
inline constexpr int kLandCoverCount = 4;
double roughness_of(LandCover cls);

struct TerrainGrid {
  GridSpec spec;
  std::vector<double> elevation;             // [y][x], metres
  std::vector<std::uint8_t> roughness_class;  // [y][x], LandCover values

  TerrainGrid() = default;
  explicit TerrainGrid(GridSpec spec);

  double elev(int y, int x) const { return elevation[static_cast<std::size_t>(y) * spec.nx + x]; }
  void validate() const;
};

enum TerrainFeature : int {
  kFeatElevation = 0,
  kFeatTpi = 1,
  kFeatSlopeEast = 2,
  kFeatSlopeNorth = 3,
  kFeatRoughness = 4,
};
inline constexpr int kTerrainFeatureCount = 5;
extern const std::array<const char*, kTerrainFeatureCount> kTerrainFeatureNames;

/// Per-node static conditioning features laid out [y][x][f].
struct TerrainFeatures {
  GridSpec spec;
  std::vector<double> data;

  TerrainFeatures() = default;
  explicit TerrainFeatures(GridSpec spec);

  std::size_t index(int y, int x, int f) const {
    return (static_cast<std::size_t>(y) * spec.nx + x) * kTerrainFeatureCount + f;
  }
  double at(int y, int x, int f) const { return data[index(y, x, f)]; }
  double& at(int y, int x, int f) { return data[index(y, x, f)]; }
};

/// One coarse/fine/terrain training triple.
struct PatchPair {
  int coarse_size = 0;             // 5 for 0.5 deg on a 0.125 deg grid
  int fine_size = 0;               // 101 for 0.5 deg on a 0.005 deg grid
  std::vector<double> coarse;      // [y][x][c]
  std::vector<double> fine_label;  // [y][x][c]
  std::vector<double> terrain;     // [y][x][f]
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  int fine_x0 = 0;  // origin node index on the fine grid
  int fine_y0 = 0;
  TimePoint time{};
  std::string event_id;
};

}  // namespace acdf
