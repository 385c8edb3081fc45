#pragma once

#include <string>
#include <vector>

#include "acdf/grid.hpp"

namespace acdf {

enum class TerrainClass { kValley, kFlat, kRidge };

std::string to_string(TerrainClass c);

/// Valley below -50 m, ridge above +50 m; the thresholds themselves are flat.
inline constexpr double kTpiThreshold = 50.0;

/// Topographic position index: elevation minus the mean elevation of the
/// cells within radius_m (planar distance, centre excluded). Edge cells use
/// the truncated neighbourhood. radius_m must reach at least one cell.
std::vector<double> compute_tpi(const TerrainGrid& terrain, double radius_m);

TerrainClass classify_tpi(double tpi);
std::vector<TerrainClass> classify_tpi(const std::vector<double>& tpi);

/// Metres spanned by one cell along x (east) and y (north), using the
/// domain's central latitude for the east-west scale.
double cell_width_m(const GridSpec& spec);
double cell_height_m(const GridSpec& spec);

inline constexpr int kDefaultTpiRadiusCells = 10;

/// Normalised elevation, TPI (m), central-difference slopes (m/m) and the
/// land-cover roughness scalar. The TPI radius is tpi_radius_cells north-south
/// cell heights.
TerrainFeatures terrain_features(const TerrainGrid& terrain,
                                 int tpi_radius_cells = kDefaultTpiRadiusCells);

}  // namespace acdf
