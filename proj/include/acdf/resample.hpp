#pragma once

#include <array>
#include <span>

#include "acdf/grid.hpp"

namespace acdf {

/// Four-node bilinear stencil of a point on a node-registered grid.
struct BilinearStencil {
  int x0 = 0;
  int y0 = 0;
  double wx = 0.0;  // weight of column x0 + 1
  double wy = 0.0;  // weight of row y0 + 1

  /// Weighted combination written so that wx, wy in {0, 1} reproduce a node
  /// value exactly.
  template <class Get>
  double apply(Get&& get) const {
    const double south = (1.0 - wx) * get(y0, x0) + wx * get(y0, x0 + 1);
    const double north = (1.0 - wx) * get(y0 + 1, x0) + wx * get(y0 + 1, x0 + 1);
    return (1.0 - wy) * south + wy * north;
  }
};

/// Throws OutOfDomainError when the point lies outside the grid bbox.
BilinearStencil bilinear_stencil(const GridSpec& spec, double lat, double lon);

/// Bilinear (u, v) at a point for timestep t_index.
std::array<double, 2> sample_at(const WindField& field, double lat, double lon,
                                std::size_t t_index);

/// Bilinear sample of a [y][x] scalar raster.
double sample_scalar(const GridSpec& spec, std::span<const double> values, double lat, double lon);

/// Bilinear resampling of every channel and timestep onto target, whose bbox
/// must lie inside the source bbox.
WindField bilinear_resample(const WindField& field, const GridSpec& target);

/// Area-consistent aggregation onto a coarser, node-aligned grid: every
/// coarse node takes the mean of the fine nodes within half a coarse cell
/// (truncated at the domain edge).
WindField block_mean(const WindField& fine, const GridSpec& coarse);

/// Integer refinement factor between two aligned grids (coarse.cell_size /
/// fine.cell_size); throws AlignmentError when it is not integral or the
/// bounds differ.
int refinement_ratio(const GridSpec& coarse, const GridSpec& fine);

}  // namespace acdf
