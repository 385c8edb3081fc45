#include "acdf/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "acdf/errors.hpp"
#include "acdf/parallel.hpp"

namespace acdf {

std::string to_string(TerrainClass c) {
  switch (c) {
    case TerrainClass::kValley: return "valley";
    case TerrainClass::kFlat: return "flat";
    case TerrainClass::kRidge: return "ridge";
  }
  return "unknown";
}

double cell_width_m(const GridSpec& spec) {
  const double mid_lat = 0.5 * (spec.lat_min + spec.lat_max);
  return spec.cell_size * kMetersPerDegree * std::cos(mid_lat * std::numbers::pi / 180.0);
}

double cell_height_m(const GridSpec& spec) { return spec.cell_size * kMetersPerDegree; }

std::vector<double> compute_tpi(const TerrainGrid& terrain, double radius_m) {
  const GridSpec& spec = terrain.spec;
  const double dx = cell_width_m(spec), dy = cell_height_m(spec);
  if (!(radius_m >= std::min(dx, dy) * (1.0 - 1e-9))) {
    throw InvalidArgumentError("TPI radius must cover at least one cell");
  }
  struct Offset {
    int dx, dy;
  };
  std::vector<Offset> offsets;
  const int rx = static_cast<int>(std::floor(radius_m / dx + 1e-9));
  const int ry = static_cast<int>(std::floor(radius_m / dy + 1e-9));
  const double r2 = radius_m * radius_m * (1.0 + 1e-12);
  for (int oy = -ry; oy <= ry; ++oy) {
    for (int ox = -rx; ox <= rx; ++ox) {
      if (ox == 0 && oy == 0) continue;
      if ((ox * dx) * (ox * dx) + (oy * dy) * (oy * dy) <= r2) offsets.push_back({ox, oy});
    }
  }

  std::vector<double> tpi(spec.node_count(), 0.0);
  parallel_for(static_cast<std::size_t>(spec.ny), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < spec.nx; ++x) {
      double sum = 0.0;
      int n = 0;
      for (const Offset& o : offsets) {
        const int xx = x + o.dx, yy = y + o.dy;
        if (xx < 0 || yy < 0 || xx >= spec.nx || yy >= spec.ny) continue;
        sum += terrain.elev(yy, xx);
        ++n;
      }
      tpi[static_cast<std::size_t>(y) * spec.nx + x] = n > 0 ? terrain.elev(y, x) - sum / n : 0.0;
    }
  });
  return tpi;
}

TerrainClass classify_tpi(double tpi) {
  if (tpi < -kTpiThreshold) return TerrainClass::kValley;
  if (tpi > kTpiThreshold) return TerrainClass::kRidge;
  return TerrainClass::kFlat;
}

std::vector<TerrainClass> classify_tpi(const std::vector<double>& tpi) {
  std::vector<TerrainClass> out(tpi.size());
  std::transform(tpi.begin(), tpi.end(), out.begin(), [](double v) { return classify_tpi(v); });
  return out;
}

TerrainFeatures terrain_features(const TerrainGrid& terrain, int tpi_radius_cells) {
  terrain.validate();
  const GridSpec& spec = terrain.spec;
  TerrainFeatures out(spec);
  const std::vector<double> tpi = compute_tpi(terrain, tpi_radius_cells * cell_height_m(spec));

  double max_abs = 0.0;
  for (double e : terrain.elevation) max_abs = std::max(max_abs, std::abs(e));
  const double dx = cell_width_m(spec), dy = cell_height_m(spec);

  for (int y = 0; y < spec.ny; ++y) {
    const int ys = std::max(0, y - 1), yn = std::min(spec.ny - 1, y + 1);
    for (int x = 0; x < spec.nx; ++x) {
      const int xw = std::max(0, x - 1), xe = std::min(spec.nx - 1, x + 1);
      const std::size_t cell = static_cast<std::size_t>(y) * spec.nx + x;
      out.at(y, x, kFeatElevation) = max_abs > 0.0 ? terrain.elevation[cell] / max_abs : 0.0;
      out.at(y, x, kFeatTpi) = tpi[cell];
      out.at(y, x, kFeatSlopeEast) = (terrain.elev(y, xe) - terrain.elev(y, xw)) / ((xe - xw) * dx);
      out.at(y, x, kFeatSlopeNorth) = (terrain.elev(yn, x) - terrain.elev(ys, x)) / ((yn - ys) * dy);
      out.at(y, x, kFeatRoughness) =
          roughness_of(static_cast<LandCover>(terrain.roughness_class[cell]));
    }
  }
  return out;
}

}  // namespace acdf
