#include <cmath>

#include "atlasfuse/distance.hpp"
#include "atlasfuse/metrics.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace atlasfuse;

namespace {

LabelVolume box(const Dims& d, const Spacing& s, std::array<std::int64_t, 3> lo, std::array<std::int64_t, 3> hi,
                std::uint16_t label = 1) {
  LabelVolume v = LabelVolume::zeros(d, s, std::max<std::uint16_t>(label, 1));
  for (std::int64_t z = lo[2]; z < hi[2]; ++z)
    for (std::int64_t y = lo[1]; y < hi[1]; ++y)
      for (std::int64_t x = lo[0]; x < hi[0]; ++x) v.labels()[d.index(x, y, z)] = label;
  return v;
}

void check_against_oracle(const LabelVolume& p, const LabelVolume& t, std::uint16_t label, double tol) {
  const auto want = testing::brute_metrics(p, t, label, tol);
  CHECK(std::abs(volume_dice(p, t, label) - want.dice) <= 1e-12);
  CHECK(std::abs(avg_surface_distance(p, t, label) - want.asd) <= 1e-9);
  CHECK(std::abs(surface_dice(p, t, label, tol) - want.surface_dice) <= 1e-12);
  CHECK(std::abs(hausdorff(p, t, label) - want.hausdorff) <= 1e-9);
  CHECK(std::abs(dist95(p, t, label) - want.dist95) <= 1e-9);
}

}  // namespace

TEST_CASE("distance field matches brute force") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d{static_cast<std::uint64_t>(1 + rng() % 9), static_cast<std::uint64_t>(1 + rng() % 9),
                 static_cast<std::uint64_t>(1 + rng() % 9)};
    const Spacing s{0.5 + (rng() % 4) * 0.5, 1.0, 0.7 + (rng() % 3) * 0.9};
    std::vector<std::uint8_t> f(d.count());
    std::bernoulli_distribution on(trial % 4 == 0 ? 0.02 : 0.15);
    for (auto& x : f) x = on(rng);
    const auto got = squared_distance_field(f, d, s);
    for (std::size_t i = 0; i < d.count(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      const auto a = d.coords(i);
      for (std::size_t j = 0; j < d.count(); ++j) {
        if (!f[j]) continue;
        const auto b = d.coords(j);
        const double dx = (double(a[0]) - double(b[0])) * s.sx, dy = (double(a[1]) - double(b[1])) * s.sy,
                     dz = (double(a[2]) - double(b[2])) * s.sz;
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      if (std::isinf(best)) {
        CHECK(std::isinf(got[i]));
      } else {
        CHECK(std::abs(got[i] - best) <= 1e-9);
      }
    }
  }
}

TEST_CASE("boundary extraction uses 6-connectivity and the volume border") {
  const Dims d{5, 5, 5};
  const auto full = box(d, {}, {0, 0, 0}, {5, 5, 5});
  CHECK(extract_boundary(full, 1).points.size() == 125 - 27);
  const auto cube = box(d, {}, {1, 1, 1}, {4, 4, 4});
  CHECK(extract_boundary(cube, 1).points.size() == 27 - 1);
  CHECK(extract_boundary(cube, 1).points.size() == testing::brute_boundary(cube, 1).size());
}

TEST_CASE("metrics match the all-pairs oracle on random structures") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims d{static_cast<std::uint64_t>(4 + rng() % 13), static_cast<std::uint64_t>(4 + rng() % 13),
                 static_cast<std::uint64_t>(4 + rng() % 13)};
    const Spacing s = trial % 2 ? Spacing{1, 1, 1} : Spacing{0.8, 1.25, 2.0};
    LabelVolume p = LabelVolume::zeros(d, s, 2), t = p;
    testing::paint_random_boxes(rng, p, 1, 3);
    testing::paint_random_boxes(rng, t, 1, 3);
    testing::paint_random_boxes(rng, p, 2, 1);
    testing::paint_random_boxes(rng, t, 2, 2);
    for (std::uint16_t l : {1, 2}) {
      if (testing::brute_solid(p, l).empty() || testing::brute_solid(t, l).empty()) continue;
      check_against_oracle(p, t, l, trial % 3 == 0 ? 2.0 : 1.0);
      const double hd = hausdorff(p, t, l), d95 = dist95(p, t, l);
      CHECK(d95 >= 0.0);
      CHECK(d95 <= hd);
      CHECK(avg_surface_distance(p, t, l) <= hd);
      const double sd = surface_dice(p, t, l), vd = volume_dice(p, t, l);
      CHECK((sd >= 0.0 && sd <= 1.0));
      CHECK((vd >= 0.0 && vd <= 1.0));
    }
  }
}

TEST_CASE("analytic cases") {
  const Dims d{16, 16, 16};
  const auto a = box(d, {}, {3, 3, 3}, {9, 9, 9});
  CHECK(volume_dice(a, a, 1) == 1.0);
  CHECK(avg_surface_distance(a, a, 1) == 0.0);
  CHECK(hausdorff(a, a, 1) == 0.0);
  CHECK(dist95(a, a, 1) == 0.0);
  CHECK(surface_dice(a, a, 1) == 1.0);
  for (int shift = 1; shift <= 4; ++shift) {
    const auto b = box(d, {}, {3 + shift, 3, 3}, {9 + shift, 9, 9});
    CHECK(hausdorff(a, b, 1) == doctest::Approx(shift));
    CHECK(volume_dice(a, b, 1) == doctest::Approx(double(6 - shift) / 6.0));
  }
  // Anisotropic spacing scales the shift.
  const Spacing s{2.0, 1.0, 1.0};
  const auto c = box(d, s, {3, 3, 3}, {9, 9, 9});
  const auto e = box(d, s, {5, 3, 3}, {11, 9, 9});
  CHECK(hausdorff(c, e, 1) == doctest::Approx(4.0));
  // Doubling sz doubles a pure z offset.
  const auto z1 = box(d, {1, 1, 1}, {3, 3, 3}, {9, 9, 9}), z2 = box(d, {1, 1, 1}, {3, 3, 6}, {9, 9, 12});
  const auto w1 = box(d, {1, 1, 2}, {3, 3, 3}, {9, 9, 9}), w2 = box(d, {1, 1, 2}, {3, 3, 6}, {9, 9, 12});
  CHECK(hausdorff(w1, w2, 1) == doctest::Approx(2.0 * hausdorff(z1, z2, 1)));
  CHECK(avg_surface_distance(w1, w2, 1) > avg_surface_distance(z1, z2, 1));
}

TEST_CASE("metric symmetry and translation invariance") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims d{14, 14, 14};
    LabelVolume p = LabelVolume::zeros(d, {1, 1.5, 0.75}, 1), t = p;
    // Keep structures off the high faces so a +2 shift stays inside.
    LabelVolume small = LabelVolume::zeros({10, 10, 10}, {}, 1), small2 = small;
    testing::paint_random_boxes(rng, small, 1, 2);
    testing::paint_random_boxes(rng, small2, 1, 2);
    LabelVolume ps = p, ts = t;
    for (std::size_t i = 0; i < small.size(); ++i) {
      const auto c = small.dims().coords(i);
      p.labels()[d.index(c[0] + 1, c[1] + 1, c[2] + 1)] = small.labels()[i];
      t.labels()[d.index(c[0] + 1, c[1] + 1, c[2] + 1)] = small2.labels()[i];
      ps.labels()[d.index(c[0] + 3, c[1] + 2, c[2] + 1)] = small.labels()[i];
      ts.labels()[d.index(c[0] + 3, c[1] + 2, c[2] + 1)] = small2.labels()[i];
    }
    CHECK(volume_dice(p, t, 1) == volume_dice(t, p, 1));
    CHECK(avg_surface_distance(p, t, 1) == doctest::Approx(avg_surface_distance(t, p, 1)));
    CHECK(hausdorff(p, t, 1) == hausdorff(t, p, 1));
    CHECK(dist95(p, t, 1) == dist95(t, p, 1));
    CHECK(surface_dice(p, t, 1) == surface_dice(t, p, 1));
    CHECK(volume_dice(p, t, 1) == volume_dice(ps, ts, 1));
    CHECK(hausdorff(p, t, 1) == doctest::Approx(hausdorff(ps, ts, 1)));
    CHECK(avg_surface_distance(p, t, 1) == doctest::Approx(avg_surface_distance(ps, ts, 1)));
  }
}

TEST_CASE("empty structures") {
  const Dims d{6, 6, 6};
  const auto a = box(d, {}, {1, 1, 1}, {3, 3, 3});
  const LabelVolume z = LabelVolume::zeros(d, {}, 1);
  CHECK(volume_dice(z, z, 1) == 1.0);
  CHECK(volume_dice(a, z, 1) == 0.0);
  CHECK_THROWS_AS(hausdorff(a, z, 1), Error);
  CHECK_THROWS_AS(avg_surface_distance(z, a, 1), Error);

  LabelVolume p = LabelVolume::zeros(d, {}, 3), t = p;
  for (std::size_t i = 0; i < 8; ++i) {
    p.labels()[i] = 1;
    t.labels()[i] = 1;
  }
  t.labels()[100] = 2;  // label 2 only in truth; label 3 in neither
  const auto r = evaluate_all(p, t);
  CHECK(r.excluded == std::vector<std::uint16_t>{3});
  REQUIRE(r.structures.count(2) == 1);
  CHECK(r.structures.at(2).volume_dice == 0.0);
  CHECK_FALSE(r.structures.at(2).hausdorff_mm.has_value());
  CHECK(*r.aggregate.volume_dice == doctest::Approx(0.5));
  CHECK(*r.aggregate_std.volume_dice == doctest::Approx(0.5));
  CHECK(*r.aggregate.hausdorff_mm == 0.0);
}

TEST_CASE("nearest-rank percentile") {
  std::vector<double> v(20);
  for (int i = 0; i < 20; ++i) v[i] = 20 - i;
  CHECK(nearest_rank_percentile(v, 0.95) == 19.0);
  CHECK(nearest_rank_percentile({5.0}, 0.95) == 5.0);
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[i] = i + 1;
  CHECK(nearest_rank_percentile(hundred, 0.95) == 95.0);
}

TEST_CASE("evaluate_all rejects incompatible volumes") {
  CHECK_THROWS_AS(evaluate_all(LabelVolume::zeros({4, 4, 4}, {}, 1), LabelVolume::zeros({4, 4, 5}, {}, 1)), Error);
}
