#include "acdf/patches.hpp"

#include <cmath>
#include <string>

#include "acdf/errors.hpp"
#include "acdf/resample.hpp"

namespace acdf {

namespace {

int whole_cells(double degrees, double cell, const char* what) {
  const double cells = degrees / cell;
  const long n = std::lround(cells);
  if (n < 1 || std::abs(cells - static_cast<double>(n)) > 1e-6) {
    throw AlignmentError(std::string(what) + " is not a whole number of coarse cells");
  }
  return static_cast<int>(n);
}

int positions_along(int nodes, int patch_cells, int stride_cells) {
  const int span = nodes - 1;
  if (span < patch_cells) return 0;
  return (span - patch_cells) / stride_cells + 1;
}

}  // namespace

PatchLayout make_patch_layout(const GridSpec& coarse, const GridSpec& fine, double patch_deg,
                              double stride_deg) {
  PatchLayout layout;
  layout.ratio = refinement_ratio(coarse, fine);
  const int patch_cells = whole_cells(patch_deg, coarse.cell_size, "patch size");
  layout.coarse_stride = whole_cells(stride_deg, coarse.cell_size, "patch stride");
  layout.coarse_size = patch_cells + 1;
  layout.fine_size = patch_cells * layout.ratio + 1;
  layout.columns = positions_along(coarse.nx, patch_cells, layout.coarse_stride);
  layout.rows = positions_along(coarse.ny, patch_cells, layout.coarse_stride);
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.columns; ++c) {
      PatchLayout::Position p;
      p.coarse_x0 = c * layout.coarse_stride;
      p.coarse_y0 = r * layout.coarse_stride;
      p.fine_x0 = p.coarse_x0 * layout.ratio;
      p.fine_y0 = p.coarse_y0 * layout.ratio;
      layout.positions.push_back(p);
    }
  }
  return layout;
}

void for_each_patch(const WindField& coarse, const WindField& fine, const TerrainFeatures& terrain,
                    const PatchLayout& layout, const std::string& event_id,
                    const std::function<void(const PatchPair&)>& fn) {
  if (coarse.times != fine.times) throw AlignmentError("coarse and fine fields have different times");
  if (!terrain.spec.same_geometry(fine.spec)) {
    throw AlignmentError("terrain features are not on the fine grid");
  }
  if (refinement_ratio(coarse.spec, fine.spec) != layout.ratio) {
    throw AlignmentError("patch layout does not match the grids");
  }
  const int cs = layout.coarse_size, fs = layout.fine_size;
  PatchPair pair;
  pair.coarse_size = cs;
  pair.fine_size = fs;
  pair.event_id = event_id;
  pair.coarse.resize(static_cast<std::size_t>(cs) * cs * 2);
  pair.fine_label.resize(static_cast<std::size_t>(fs) * fs * 2);
  pair.terrain.resize(static_cast<std::size_t>(fs) * fs * kTerrainFeatureCount);
  for (std::size_t t = 0; t < coarse.time_count(); ++t) {
    pair.time = coarse.times[t];
    for (const auto& p : layout.positions) {
      pair.origin_lon = coarse.spec.lon(p.coarse_x0);
      pair.origin_lat = coarse.spec.lat(p.coarse_y0);
      pair.fine_x0 = p.fine_x0;
      pair.fine_y0 = p.fine_y0;
      auto out = pair.coarse.begin();
      for (int y = 0; y < cs; ++y) {
        for (int x = 0; x < cs; ++x) {
          *out++ = coarse.at(t, p.coarse_y0 + y, p.coarse_x0 + x, 0);
          *out++ = coarse.at(t, p.coarse_y0 + y, p.coarse_x0 + x, 1);
        }
      }
      out = pair.fine_label.begin();
      auto tf = pair.terrain.begin();
      for (int y = 0; y < fs; ++y) {
        const auto row = fine.data.begin() + static_cast<long>(fine.index(t, p.fine_y0 + y, p.fine_x0, 0));
        out = std::copy(row, row + 2L * fs, out);
        const auto trow = terrain.data.begin() + static_cast<long>(terrain.index(p.fine_y0 + y, p.fine_x0, 0));
        tf = std::copy(trow, trow + static_cast<long>(fs) * kTerrainFeatureCount, tf);
      }
      fn(pair);
    }
  }
}

std::vector<PatchPair> extract_patches(const WindField& coarse, const WindField& fine,
                                       const TerrainFeatures& terrain, double patch_deg,
                                       double stride_deg, const std::string& event_id) {
  const PatchLayout layout = make_patch_layout(coarse.spec, fine.spec, patch_deg, stride_deg);
  std::vector<PatchPair> pairs;
  pairs.reserve(layout.positions.size() * coarse.time_count());
  for_each_patch(coarse, fine, terrain, layout, event_id,
                 [&](const PatchPair& p) { pairs.push_back(p); });
  return pairs;
}

std::vector<double> upsample_patch(std::span<const double> coarse, int coarse_size, int ratio) {
  if (coarse.size() != static_cast<std::size_t>(coarse_size) * coarse_size * 2) {
    throw ShapeError("coarse patch has the wrong number of values");
  }
  const int fs = (coarse_size - 1) * ratio + 1;
  std::vector<double> out(static_cast<std::size_t>(fs) * fs * 2);
  auto get = [&](int y, int x, int c) {
    return coarse[(static_cast<std::size_t>(y) * coarse_size + x) * 2 + c];
  };
  for (int fy = 0; fy < fs; ++fy) {
    BilinearStencil s;
    s.y0 = std::min(fy / ratio, coarse_size - 2);
    s.wy = static_cast<double>(fy - s.y0 * ratio) / ratio;
    for (int fx = 0; fx < fs; ++fx) {
      s.x0 = std::min(fx / ratio, coarse_size - 2);
      s.wx = static_cast<double>(fx - s.x0 * ratio) / ratio;
      for (int c = 0; c < 2; ++c) {
        out[(static_cast<std::size_t>(fy) * fs + fx) * 2 + c] =
            s.apply([&](int y, int x) { return get(y, x, c); });
      }
    }
  }
  return out;
}

PatchBlender::PatchBlender(GridSpec target)
    : target_(target), mean_(target.node_count() * 2, 0.0), count_(target.node_count(), 0) {}

void PatchBlender::add(int fine_x0, int fine_y0, int size, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(size) * size * 2) {
    throw ShapeError("patch prediction has the wrong number of values");
  }
  if (fine_x0 < 0 || fine_y0 < 0 || fine_x0 + size > target_.nx || fine_y0 + size > target_.ny) {
    throw OutOfDomainError("patch prediction extends beyond the target grid");
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::size_t cell = static_cast<std::size_t>(fine_y0 + y) * target_.nx + fine_x0 + x;
      const std::size_t src = (static_cast<std::size_t>(y) * size + x) * 2;
      const int k = ++count_[cell];
      mean_[cell * 2] += (values[src] - mean_[cell * 2]) / k;
      mean_[cell * 2 + 1] += (values[src + 1] - mean_[cell * 2 + 1]) / k;
    }
  }
}

void PatchBlender::add(const PatchPrediction& p) {
  const double fx = target_.x_of(p.origin_lon), fy = target_.y_of(p.origin_lat);
  if (fx != std::round(fx) || fy != std::round(fy)) {
    throw AlignmentError("patch origin is not on a target grid node");
  }
  add(static_cast<int>(fx), static_cast<int>(fy), p.size, p.values);
}

WindField PatchBlender::finish(TimePoint time) const {
  std::string missing;
  std::size_t uncovered = 0;
  for (std::size_t cell = 0; cell < count_.size(); ++cell) {
    if (count_[cell] > 0) continue;
    if (++uncovered <= 8) {
      missing += " (x=" + std::to_string(cell % target_.nx) + ", y=" + std::to_string(cell / target_.nx) + ")";
    }
  }
  if (uncovered > 0) {
    throw CoverageError(std::to_string(uncovered) + " target cells are not covered by any patch:" +
                        missing + (uncovered > 8 ? " ..." : ""));
  }
  WindField out(target_, {time});
  out.data = mean_;
  return out;
}

BlendResult blend_patches(const std::vector<PatchPrediction>& patches, const GridSpec& target,
                          TimePoint time) {
  PatchBlender blender(target);
  for (const auto& p : patches) blender.add(p);
  return {blender.finish(time), blender.coverage()};
}

}  // namespace acdf
