#include "atlasfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "atlasfuse/distance.hpp"

namespace atlasfuse {
namespace {

struct Box {
  std::array<std::uint64_t, 3> lo{}, hi{};  // inclusive
  bool empty = true;

  void add(const std::array<std::uint64_t, 3>& c) {
    if (empty) {
      lo = hi = c;
      empty = false;
      return;
    }
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  Dims dims() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
};

bool is_boundary(std::span<const std::uint16_t> v, const Dims& d, std::uint64_t x, std::uint64_t y, std::uint64_t z,
                 std::uint16_t label) {
  if (x == 0 || y == 0 || z == 0 || x + 1 == d.nx || y + 1 == d.ny || z + 1 == d.nz) return true;
  const std::size_t i = d.index(x, y, z);
  const std::size_t sy = d.nx, sz = d.nx * d.ny;
  return v[i - 1] != label || v[i + 1] != label || v[i - sy] != label || v[i + sy] != label || v[i - sz] != label ||
         v[i + sz] != label;
}

// Distances in mm from each boundary point of one structure to the other
// structure's boundary and to its solid voxel set.
struct SurfaceDistances {
  std::vector<double> pred_to_truth_boundary, truth_to_pred_boundary;
  std::vector<double> pred_to_truth_solid, truth_to_pred_solid;
};

SurfaceDistances surface_distances(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label) {
  require_compatible(pred.volume(), truth.volume(), "metrics");
  const Dims& d = pred.dims();
  const auto p = pred.labels();
  const auto t = truth.labels();
  Box box;
  bool has_p = false, has_t = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool ip = p[i] == label, it = t[i] == label;
    if (ip || it) box.add(d.coords(i));
    has_p |= ip;
    has_t |= it;
  }
  if (!has_p || !has_t) {
    throw Error(Errc::EmptyStructure, "label " + std::to_string(label) + " is empty in " +
                                          (has_p ? "truth" : has_t ? "prediction" : "both volumes"));
  }
  // All features live inside the union bounding box, so transforms restricted
  // to it are exact for every query point inside it.
  const Dims bd = box.dims();
  const std::size_t bn = bd.count();
  std::vector<std::uint8_t> p_solid(bn), t_solid(bn), p_bound(bn), t_bound(bn);
  for (std::uint64_t z = 0; z < bd.nz; ++z) {
    for (std::uint64_t y = 0; y < bd.ny; ++y) {
      for (std::uint64_t x = 0; x < bd.nx; ++x) {
        const std::uint64_t gx = x + box.lo[0], gy = y + box.lo[1], gz = z + box.lo[2];
        const std::size_t g = d.index(gx, gy, gz);
        const std::size_t b = bd.index(x, y, z);
        p_solid[b] = p[g] == label;
        t_solid[b] = t[g] == label;
        p_bound[b] = p_solid[b] && is_boundary(p, d, gx, gy, gz, label);
        t_bound[b] = t_solid[b] && is_boundary(t, d, gx, gy, gz, label);
      }
    }
  }
  const Spacing& s = pred.spacing();
  const auto d_tb = squared_distance_field(t_bound, bd, s);
  const auto d_pb = squared_distance_field(p_bound, bd, s);
  const auto d_ts = squared_distance_field(t_solid, bd, s);
  const auto d_ps = squared_distance_field(p_solid, bd, s);
  SurfaceDistances out;
  for (std::size_t b = 0; b < bn; ++b) {
    if (p_bound[b]) {
      out.pred_to_truth_boundary.push_back(std::sqrt(d_tb[b]));
      out.pred_to_truth_solid.push_back(std::sqrt(d_ts[b]));
    }
    if (t_bound[b]) {
      out.truth_to_pred_boundary.push_back(std::sqrt(d_pb[b]));
      out.truth_to_pred_solid.push_back(std::sqrt(d_ps[b]));
    }
  }
  return out;
}

double mean_of(const std::vector<double>& a, const std::vector<double>& b) {
  const double sum = std::accumulate(a.begin(), a.end(), 0.0) + std::accumulate(b.begin(), b.end(), 0.0);
  return sum / static_cast<double>(a.size() + b.size());
}

double surface_dice_from(const SurfaceDistances& s, double tol) {
  const auto within = [tol](const std::vector<double>& v) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [tol](double x) { return x <= tol; }));
  };
  return (within(s.pred_to_truth_boundary) + within(s.truth_to_pred_boundary)) /
         static_cast<double>(s.pred_to_truth_boundary.size() + s.truth_to_pred_boundary.size());
}

double hausdorff_from(const SurfaceDistances& s) {
  return std::max(*std::max_element(s.pred_to_truth_solid.begin(), s.pred_to_truth_solid.end()),
                  *std::max_element(s.truth_to_pred_solid.begin(), s.truth_to_pred_solid.end()));
}

double dist95_from(const SurfaceDistances& s) {
  std::vector<double> pooled = s.pred_to_truth_solid;
  pooled.insert(pooled.end(), s.truth_to_pred_solid.begin(), s.truth_to_pred_solid.end());
  return nearest_rank_percentile(std::move(pooled), 0.95);
}

}  // namespace

BoundaryPointSet extract_boundary(const LabelVolume& labels, std::uint16_t label) {
  BoundaryPointSet out{{}, labels.spacing()};
  const Dims& d = labels.dims();
  const auto v = labels.labels();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != label) continue;
    const auto c = d.coords(i);
    if (is_boundary(v, d, c[0], c[1], c[2], label)) out.points.push_back(c);
  }
  return out;
}

double volume_dice(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label) {
  require_compatible(pred.volume(), truth.volume(), "volume dice");
  const auto p = pred.labels();
  const auto t = truth.labels();
  std::size_t np = 0, nt = 0, both = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] == label, b = t[i] == label;
    np += a;
    nt += b;
    both += a && b;
  }
  if (np + nt == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + nt);
}

double avg_surface_distance(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label) {
  const auto s = surface_distances(pred, truth, label);
  return mean_of(s.pred_to_truth_boundary, s.truth_to_pred_boundary);
}

double surface_dice(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label, double tol_mm) {
  return surface_dice_from(surface_distances(pred, truth, label), tol_mm);
}

double hausdorff(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label) {
  return hausdorff_from(surface_distances(pred, truth, label));
}

double dist95(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label) {
  return dist95_from(surface_distances(pred, truth, label));
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::EmptySample, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const auto k = static_cast<double>(values.size());
  // Guard against q*k landing a hair above an integer (e.g. 0.95*20).
  auto rank = static_cast<std::size_t>(std::ceil(q * k - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

namespace {

void summarize(const std::vector<double>& v, std::optional<double>& mean, std::optional<double>& sd) {
  if (v.empty()) return;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  mean = m;
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

MetricsReport evaluate_all(const LabelVolume& pred, const LabelVolume& truth, double tol_mm) {
  require_compatible(pred.volume(), truth.volume(), "evaluate");
  if (!(tol_mm >= 0.0)) throw Error(Errc::InvalidArgument, "tolerance must be >= 0");
  const std::uint16_t n_labels = std::max(pred.num_labels(), truth.num_labels());
  std::vector<std::size_t> count_p(n_labels + 1u, 0), count_t(n_labels + 1u, 0);
  for (auto v : pred.labels()) ++count_p[v];
  for (auto v : truth.labels()) ++count_t[v];

  MetricsReport report;
  report.tolerance_mm = tol_mm;
  std::vector<double> col[5];
  for (std::uint32_t l = 1; l <= n_labels; ++l) {
    const auto label = static_cast<std::uint16_t>(l);
    if (count_p[l] == 0 && count_t[l] == 0) {
      report.excluded.push_back(label);
      continue;
    }
    report.included.push_back(label);
    StructureMetrics m;
    m.volume_dice = volume_dice(pred, truth, label);
    col[0].push_back(m.volume_dice);
    if (count_p[l] > 0 && count_t[l] > 0) {
      const auto s = surface_distances(pred, truth, label);
      m.avg_surface_dist_mm = mean_of(s.pred_to_truth_boundary, s.truth_to_pred_boundary);
      m.surface_dice = surface_dice_from(s, tol_mm);
      m.hausdorff_mm = hausdorff_from(s);
      m.dist95_mm = dist95_from(s);
      col[1].push_back(*m.avg_surface_dist_mm);
      col[2].push_back(*m.surface_dice);
      col[3].push_back(*m.hausdorff_mm);
      col[4].push_back(*m.dist95_mm);
    }
    report.structures.emplace(label, m);
  }
  summarize(col[0], report.aggregate.volume_dice, report.aggregate_std.volume_dice);
  summarize(col[1], report.aggregate.avg_surface_dist_mm, report.aggregate_std.avg_surface_dist_mm);
  summarize(col[2], report.aggregate.surface_dice, report.aggregate_std.surface_dice);
  summarize(col[3], report.aggregate.hausdorff_mm, report.aggregate_std.hausdorff_mm);
  summarize(col[4], report.aggregate.dist95_mm, report.aggregate_std.dist95_mm);
  return report;
}

}  // namespace atlasfuse
