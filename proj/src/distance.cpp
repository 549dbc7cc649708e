#include "atlasfuse/distance.hpp"

#include <limits>

#include "atlasfuse/parallel.hpp"

namespace atlasfuse {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform of sampled function f with sample spacing w:
// d(i) = min_j (w*(i-j))^2 + f(j).
void transform_line(const double* f, double* d, std::size_t n, double w, std::vector<std::size_t>& v,
                    std::vector<double>& z) {
  const double w2 = w * w;
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (!any) {
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      any = true;
      continue;
    }
    double s;
    for (;;) {
      const std::size_t p = v[k];
      // Intersection of parabolas rooted at p and q, in index units.
      const double dq = static_cast<double>(q), dp = static_cast<double>(p);
      s = ((f[q] + w2 * dq * dq) - (f[p] + w2 * dp * dp)) / (2.0 * w2 * (dq - dp));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (!any) {
    for (std::size_t q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double diff = w * (static_cast<double>(q) - static_cast<double>(v[k]));
    d[q] = diff * diff + f[v[k]];
  }
}

void transform_axis(std::vector<double>& grid, const Dims& dims, int axis, double w) {
  const std::size_t len = dims[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? dims.nx : dims.nx * dims.ny;
  const std::size_t lines = dims.count() / len;
  parallel_chunks(lines, 256, [&](std::size_t begin, std::size_t end) {
    std::vector<double> f(len), d(len), z(len + 1);
    std::vector<std::size_t> v(len);
    for (std::size_t line = begin; line < end; ++line) {
      std::size_t base;
      if (axis == 0) {
        base = line * dims.nx;
      } else if (axis == 1) {
        base = (line % dims.nx) + (line / dims.nx) * dims.nx * dims.ny;
      } else {
        base = line;
      }
      for (std::size_t i = 0; i < len; ++i) f[i] = grid[base + i * stride];
      transform_line(f.data(), d.data(), len, w, v, z);
      for (std::size_t i = 0; i < len; ++i) grid[base + i * stride] = d[i];
    }
  });
}

}  // namespace

std::vector<double> squared_distance_field(std::span<const std::uint8_t> features, const Dims& dims,
                                           const Spacing& spacing) {
  std::vector<double> grid(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) grid[i] = features[i] ? 0.0 : kInf;
  for (int axis = 0; axis < 3; ++axis) transform_axis(grid, dims, axis, spacing[axis]);
  return grid;
}

}  // namespace atlasfuse
