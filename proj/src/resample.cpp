#include "acdf/resample.hpp"

#include <cmath>
#include <string>

#include "acdf/errors.hpp"
#include "acdf/parallel.hpp"

namespace acdf {

namespace {

void axis_stencil(double coord, int n, int& i0, double& w) {
  double base = std::floor(coord);
  if (base >= n - 1) base = n - 2;
  if (base < 0) base = 0;
  i0 = static_cast<int>(base);
  w = coord - base;
  if (w < 0.0) w = 0.0;
  if (w > 1.0) w = 1.0;
}

}  // namespace

BilinearStencil bilinear_stencil(const GridSpec& spec, double lat, double lon) {
  if (!spec.contains(lat, lon)) {
    throw OutOfDomainError("point (lat " + std::to_string(lat) + ", lon " + std::to_string(lon) +
                           ") is outside the grid");
  }
  BilinearStencil s;
  axis_stencil(spec.x_of(lon), spec.nx, s.x0, s.wx);
  axis_stencil(spec.y_of(lat), spec.ny, s.y0, s.wy);
  return s;
}

std::array<double, 2> sample_at(const WindField& field, double lat, double lon,
                                std::size_t t_index) {
  if (t_index >= field.time_count()) {
    throw RangeError("time index " + std::to_string(t_index) + " out of range");
  }
  const BilinearStencil s = bilinear_stencil(field.spec, lat, lon);
  std::array<double, 2> out{};
  for (int c = 0; c < 2; ++c) {
    out[c] = s.apply([&](int y, int x) { return field.at(t_index, y, x, c); });
  }
  return out;
}

double sample_scalar(const GridSpec& spec, std::span<const double> values, double lat,
                     double lon) {
  const BilinearStencil s = bilinear_stencil(spec, lat, lon);
  return s.apply([&](int y, int x) { return values[static_cast<std::size_t>(y) * spec.nx + x]; });
}

WindField bilinear_resample(const WindField& field, const GridSpec& target) {
  target.validate();
  const GridSpec& src = field.spec;
  if (!src.contains(target.lat_min, target.lon_min) ||
      !src.contains(target.lat_max, target.lon_max)) {
    throw OutOfDomainError("resampling target bbox is not inside the source bbox");
  }
  std::vector<BilinearStencil> stencils(target.node_count());
  for (int y = 0; y < target.ny; ++y) {
    for (int x = 0; x < target.nx; ++x) {
      stencils[static_cast<std::size_t>(y) * target.nx + x] =
          bilinear_stencil(src, target.lat(y), target.lon(x));
    }
  }
  WindField out(target, field.times);
  parallel_for(field.time_count(), [&](std::size_t t) {
    for (int y = 0; y < target.ny; ++y) {
      for (int x = 0; x < target.nx; ++x) {
        const BilinearStencil& s = stencils[static_cast<std::size_t>(y) * target.nx + x];
        for (int c = 0; c < 2; ++c) {
          out.at(t, y, x, c) = s.apply([&](int yy, int xx) { return field.at(t, yy, xx, c); });
        }
      }
    }
  });
  return out;
}

int refinement_ratio(const GridSpec& coarse, const GridSpec& fine) {
  if (!coarse.same_bounds(fine)) throw AlignmentError("coarse and fine grids have different bounds");
  const double ratio = coarse.cell_size / fine.cell_size;
  const long r = std::lround(ratio);
  if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-6 ||
      (coarse.nx - 1) * r != fine.nx - 1 || (coarse.ny - 1) * r != fine.ny - 1) {
    throw AlignmentError("fine grid does not refine the coarse grid by an integer factor");
  }
  return static_cast<int>(r);
}

WindField block_mean(const WindField& fine, const GridSpec& coarse) {
  const int r = refinement_ratio(coarse, fine.spec);
  const int half = r / 2;
  WindField out(coarse, fine.times);
  parallel_for(fine.time_count(), [&](std::size_t t) {
    for (int cy = 0; cy < coarse.ny; ++cy) {
      for (int cx = 0; cx < coarse.nx; ++cx) {
        const int y_lo = std::max(0, cy * r - half), y_hi = std::min(fine.spec.ny - 1, cy * r + half);
        const int x_lo = std::max(0, cx * r - half), x_hi = std::min(fine.spec.nx - 1, cx * r + half);
        double su = 0.0, sv = 0.0;
        for (int y = y_lo; y <= y_hi; ++y) {
          for (int x = x_lo; x <= x_hi; ++x) {
            su += fine.at(t, y, x, 0);
            sv += fine.at(t, y, x, 1);
          }
        }
        const double n = static_cast<double>((y_hi - y_lo + 1) * (x_hi - x_lo + 1));
        out.at(t, cy, cx, 0) = su / n;
        out.at(t, cy, cx, 1) = sv / n;
      }
    }
  });
  return out;
}

}  // namespace acdf
