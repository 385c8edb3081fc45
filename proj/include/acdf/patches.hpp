#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "acdf/grid.hpp"

namespace acdf {

/// Patch positions tiling an aligned coarse/fine grid pair. Positions run
/// left-to-right within a row and rows run bottom-to-top; patches that would
/// cross the domain edge are dropped.
struct PatchLayout {
  int ratio = 0;          // fine nodes per coarse cell
  int coarse_size = 0;    // coarse nodes per patch side
  int fine_size = 0;      // fine nodes per patch side
  int coarse_stride = 0;  // coarse cells between neighbouring origins
  int columns = 0;
  int rows = 0;

  struct Position {
    int coarse_x0 = 0;
    int coarse_y0 = 0;
    int fine_x0 = 0;
    int fine_y0 = 0;
  };
  std::vector<Position> positions;
};

PatchLayout make_patch_layout(const GridSpec& coarse, const GridSpec& fine, double patch_deg = 0.5,
                              double stride_deg = 0.25);

/// Materialises one PatchPair per (timestep, position), timestep-major.
std::vector<PatchPair> extract_patches(const WindField& coarse, const WindField& fine,
                                       const TerrainFeatures& terrain, double patch_deg = 0.5,
                                       double stride_deg = 0.25, const std::string& event_id = "");

/// Streaming form of extract_patches: the callback receives each pair in the
/// same order without keeping the full set in memory.
void for_each_patch(const WindField& coarse, const WindField& fine, const TerrainFeatures& terrain,
                    const PatchLayout& layout, const std::string& event_id,
                    const std::function<void(const PatchPair&)>& fn);

/// Bilinear refinement of a size x size x 2 patch by an integer ratio; anchor
/// nodes are reproduced exactly.
std::vector<double> upsample_patch(std::span<const double> coarse, int coarse_size, int ratio);

/// A fine-resolution prediction placed on the target grid.
struct PatchPrediction {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  int size = 0;
  std::vector<double> values;  // [y][x][c]
};

/// Overlap-averaging accumulator. Each cell keeps a running mean, so cells
/// whose contributions all agree come out bit-identical to that value.
class PatchBlender {
public:
  explicit PatchBlender(GridSpec target);

  void add(int fine_x0, int fine_y0, int size, std::span<const double> values);
  void add(const PatchPrediction& prediction);

  const std::vector<int>& coverage() const { return count_; }
  /// Throws CoverageError naming uncovered cells.
  WindField finish(TimePoint time = {}) const;

private:
  GridSpec target_;
  std::vector<double> mean_;
  std::vector<int> count_;
};

struct BlendResult {
  WindField field;  // single timestep
  std::vector<int> coverage;
};

BlendResult blend_patches(const std::vector<PatchPrediction>& patches, const GridSpec& target,
                          TimePoint time = {});

}  // namespace acdf
