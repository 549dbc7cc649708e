#pragma once
// Shared fixtures and brute-force oracles for the unit and acceptance tests.
// The oracles deliberately avoid the library's fast paths: they loop over
// voxels and point pairs directly.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "atlasfuse/fusion.hpp"
#include "atlasfuse/volume.hpp"

namespace testing {

using namespace atlasfuse;

inline std::filesystem::path temp_dir(const std::string& name) {
  const char* root = std::getenv("ATLASFUSE_TEST_TMP");
  std::filesystem::path dir = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "atlasfuse";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline LabelVolume random_labels(std::mt19937_64& rng, const Dims& d, std::uint16_t num_labels,
                                 const Spacing& s = {}) {
  LabelVolume v = LabelVolume::zeros(d, s, num_labels);
  std::uniform_int_distribution<int> pick(0, num_labels);
  for (auto& x : v.labels()) x = static_cast<std::uint16_t>(pick(rng));
  return v;
}

// Copies `base` and flips each voxel to a random label with probability p_flip.
inline LabelVolume perturb(std::mt19937_64& rng, const LabelVolume& base, double p_flip) {
  LabelVolume v = base;
  std::bernoulli_distribution flip(p_flip);
  std::uniform_int_distribution<int> pick(0, base.num_labels());
  for (auto& x : v.labels()) {
    if (flip(rng)) x = static_cast<std::uint16_t>(pick(rng));
  }
  return v;
}

inline TrustMask random_mask(std::mt19937_64& rng, const Dims& d, double p_one, const Spacing& s = {}) {
  TrustMask m = TrustMask::filled(d, s, 0);
  std::bernoulli_distribution one(p_one);
  for (auto& x : m.values()) x = one(rng) ? 1 : 0;
  return m;
}

// Truth plus n atlases, each a noisy copy of the truth.
struct Instance {
  LabelVolume truth;
  AtlasSet set;
};

inline Instance random_instance(std::mt19937_64& rng, const Dims& d, std::size_t n_atlases, std::uint16_t num_labels,
                                double p_flip = 0.3) {
  Instance inst{random_labels(rng, d, num_labels), {}};
  inst.set.num_labels = num_labels;
  for (std::size_t i = 0; i < n_atlases; ++i) {
    AtlasEntry e;
    e.labels = perturb(rng, inst.truth, p_flip);
    inst.set.atlases.push_back(std::move(e));
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Fusion oracle: per-voxel tallies.

struct VoxelVote {
  std::uint16_t label = 0;
  std::uint16_t count = 0;
  bool unassigned = false;
};

// mode: 0 plurality, 1 majority, 2 trusted (masks), 3 oracle(k)
inline VoxelVote brute_vote(const AtlasSet& set, std::size_t i, int mode, const LabelVolume* truth = nullptr,
                            std::size_t k = 1) {
  std::vector<std::uint16_t> counts(set.num_labels + 1u, 0);
  std::size_t retained = 0;
  for (const auto& a : set.atlases) {
    if (mode == 2 && a.mask->values()[i] == 0) continue;
    ++retained;
    ++counts[a.labels.labels()[i]];
  }
  VoxelVote v;
  if (mode == 3) {
    // The tally is the number of atlases matching the truth, assigned or not.
    const std::uint16_t t = truth->labels()[i];
    v.count = counts[t];
    if (counts[t] >= k) {
      v.label = t;
    } else {
      v.unassigned = true;
    }
    return v;
  }
  if (retained == 0) {
    v.unassigned = true;
    return v;
  }
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] > v.count) {
      v.count = counts[l];
      v.label = static_cast<std::uint16_t>(l);
    }
  }
  if (mode == 1 && 2u * v.count <= set.size()) {
    v.label = 0;
    v.unassigned = true;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Metrics oracle: explicit boundary sets and all-pairs distances.

using Point = std::array<std::int64_t, 3>;

inline bool in_structure(const LabelVolume& v, std::uint16_t label, std::int64_t x, std::int64_t y, std::int64_t z) {
  const Dims& d = v.dims();
  if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::int64_t>(d.nx) || y >= static_cast<std::int64_t>(d.ny) ||
      z >= static_cast<std::int64_t>(d.nz)) {
    return false;
  }
  return v.labels()[d.index(x, y, z)] == label;
}

inline std::vector<Point> brute_solid(const LabelVolume& v, std::uint16_t label) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.labels()[i] != label) continue;
    const auto c = v.dims().coords(i);
    out.push_back({static_cast<std::int64_t>(c[0]), static_cast<std::int64_t>(c[1]), static_cast<std::int64_t>(c[2])});
  }
  return out;
}

inline std::vector<Point> brute_boundary(const LabelVolume& v, std::uint16_t label) {
  std::vector<Point> out;
  static constexpr int kOffsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (const auto& p : brute_solid(v, label)) {
    for (const auto& o : kOffsets) {
      if (!in_structure(v, label, p[0] + o[0], p[1] + o[1], p[2] + o[2])) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

inline double point_distance(const Point& a, const Point& b, const Spacing& s) {
  const double dx = (a[0] - b[0]) * s.sx, dy = (a[1] - b[1]) * s.sy, dz = (a[2] - b[2]) * s.sz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline std::vector<double> nearest_distances(const std::vector<Point>& from, const std::vector<Point>& to,
                                             const Spacing& s) {
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) best = std::min(best, point_distance(a, b, s));
    out.push_back(best);
  }
  return out;
}

struct BruteMetrics {
  double dice = 0.0;
  double asd = 0.0;
  double surface_dice = 0.0;
  double hausdorff = 0.0;
  double dist95 = 0.0;
};

// Requires both structures non-empty.
inline BruteMetrics brute_metrics(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label,
                                  double tol_mm) {
  const Spacing& s = pred.spacing();
  BruteMetrics m;
  std::size_t np = 0, nt = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred.labels()[i] == label, b = truth.labels()[i] == label;
    np += a;
    nt += b;
    both += a && b;
  }
  m.dice = 2.0 * static_cast<double>(both) / static_cast<double>(np + nt);

  const auto bp = brute_boundary(pred, label), bt = brute_boundary(truth, label);
  auto pooled = nearest_distances(bp, bt, s);
  const auto back = nearest_distances(bt, bp, s);
  pooled.insert(pooled.end(), back.begin(), back.end());
  double sum = 0.0;
  std::size_t within = 0;
  for (double d : pooled) {
    sum += d;
    within += d <= tol_mm;
  }
  m.asd = sum / static_cast<double>(pooled.size());
  m.surface_dice = static_cast<double>(within) / static_cast<double>(pooled.size());

  auto solid = nearest_distances(bp, brute_solid(truth, label), s);
  const auto solid_back = nearest_distances(bt, brute_solid(pred, label), s);
  solid.insert(solid.end(), solid_back.begin(), solid_back.end());
  std::sort(solid.begin(), solid.end());
  m.hausdorff = solid.back();
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(solid.size()) - 1e-9));
  m.dist95 = solid[std::max<std::size_t>(rank, 1) - 1];
  return m;
}

// Random blob: union of a few random boxes inside d.
inline void paint_random_boxes(std::mt19937_64& rng, LabelVolume& v, std::uint16_t label, int boxes) {
  const Dims& d = v.dims();
  for (int b = 0; b < boxes; ++b) {
    std::int64_t lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      const auto n = static_cast<std::int64_t>(d[a]);
      std::uniform_int_distribution<std::int64_t> pos(0, n - 1);
      std::int64_t p = pos(rng), q = pos(rng);
      if (p > q) std::swap(p, q);
      lo[a] = p;
      hi[a] = std::min(q, p + std::max<std::int64_t>(1, n / 2));
    }
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t x = lo[0]; x <= hi[0]; ++x) v.labels()[d.index(x, y, z)] = label;
  }
}

// ---------------------------------------------------------------------------
// Mann-Whitney oracle: enumerates every split of the pooled ranks.

// Two-sided p of the observed min U under the exact null, by enumeration of
// all C(n+m, n) subsets of positions for sample a. Assumes no ties.
inline double enumerate_mwu_p(std::size_t n, std::size_t m, double u_obs_min) {
  const std::size_t total = n + m;
  std::size_t le = 0, all = 0;
  std::vector<bool> pick(total, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n), true);
  // Iterate combinations via prev_permutation over a sorted-descending selector.
  do {
    // U_a = number of (a, b) pairs with a ranked above b.
    std::size_t u = 0, b_seen = 0;
    for (std::size_t r = 0; r < total; ++r) {
      if (pick[r]) {
        u += b_seen;
      } else {
        ++b_seen;
      }
    }
    const double umin = std::min<double>(static_cast<double>(u), static_cast<double>(n * m - u));
    ++all;
    // Two-sided: P(min(U, nm-U) <= u_obs_min) under the symmetric null.
    if (umin <= u_obs_min + 1e-9) ++le;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return std::min(1.0, static_cast<double>(le) / static_cast<double>(all));
}

// Direct BH: reject H_(i) for i <= k where k = max{i : p_(i) <= i q / m}.
inline std::vector<bool> brute_bh(const std::vector<double>& p, double q) {
  const std::size_t m = p.size();
  std::size_t k = 0;
  for (std::size_t i = 1; i <= m; ++i) {
    // p_(i): the i-th smallest value; count how many are <= candidate threshold.
    const double cut = static_cast<double>(i) * q / static_cast<double>(m);
    std::size_t at_or_below = 0;
    for (double v : p) at_or_below += v <= cut;
    if (at_or_below >= i) k = i;
  }
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<bool> out(m, false);
  if (k == 0) return out;
  const double pk = sorted[k - 1];
  for (std::size_t i = 0; i < m; ++i) out[i] = p[i] <= pk;
  return out;
}

}  // namespace testing
