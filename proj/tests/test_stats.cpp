#include "atlasfuse/stats.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace atlasfuse;

TEST_CASE("exact null counts match enumeration") {
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t m = 1; m <= 6; ++m) {
      const auto counts = mann_whitney_null_counts(n, m);
      REQUIRE(counts.size() == n * m + 1);
      std::vector<double> brute(n * m + 1, 0.0);
      std::vector<bool> pick(n + m, false);
      std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n), true);
      do {
        std::size_t u = 0, b = 0;
        for (bool is_a : pick) is_a ? u += b : ++b;
        brute[u] += 1;
      } while (std::prev_permutation(pick.begin(), pick.end()));
      CHECK(counts == brute);
    }
  }
}

TEST_CASE("fully separated samples of five") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {6, 7, 8, 9, 10};
  const auto r = mann_whitney_u(a, b);
  CHECK(r.exact);
  CHECK(r.u == 0.0);
  CHECK(r.u_a + r.u_b == 25.0);
  CHECK(r.p == doctest::Approx(2.0 / 252.0).epsilon(1e-12));
}

TEST_CASE("exact p equals enumeration for random tie-free samples") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 8;
    if (n + m > 12) continue;
    std::vector<double> a(n), b(m);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng) + 0.2;
    const auto r = mann_whitney_u(a, b);
    CHECK(r.exact);
    CHECK(std::abs(r.p - testing::enumerate_mwu_p(n, m, r.u)) <= 1e-12);
  }
}

TEST_CASE("normal approximation with ties") {
  const std::vector<double> a = {1, 2, 2, 3, 4, 4, 5, 7, 8, 9}, b = {3, 4, 6, 6, 7, 8, 9, 9, 10, 11};
  const auto r = mann_whitney_u(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.u_a + r.u_b == 100.0);
  // Tie-corrected normal approximation with continuity correction, written out directly.
  const double n = 10, m = 10, N = 20;
  const double ties = (8 - 2) * 5 + (27 - 3) * 2;  // pairs 2,3,6,7,8; triples 4,9
  const double sigma = std::sqrt(n * m / 12.0 * ((N + 1) - ties / (N * (N - 1))));
  const double z = (std::abs(r.u_a - n * m / 2) - 0.5) / sigma;
  const double p = std::erfc(z / std::sqrt(2.0));
  CHECK(r.p == doctest::Approx(p).epsilon(1e-12));
  CHECK(r.u == doctest::Approx(std::min(r.u_a, r.u_b)));
  // scipy.stats.mannwhitneyu(a, b, method="asymptotic", use_continuity=True)
  CHECK(r.u_a == 22.5);
  CHECK(r.p == doctest::Approx(0.0402614223861284).epsilon(1e-12));
}

TEST_CASE("identical pooled values give p = 1") {
  const std::vector<double> a = {3, 3, 3}, b = {3, 3, 3, 3};
  const auto r = mann_whitney_u(a, b);
  CHECK(r.p == 1.0);
}

TEST_CASE("empty samples are rejected") {
  const std::vector<double> a = {1.0}, none;
  CHECK_THROWS_AS(mann_whitney_u(a, none), Error);
  const std::vector<double> bad = {1.0, std::nan("")};
  CHECK_THROWS_AS(mann_whitney_u(a, bad), Error);
}

TEST_CASE("p-value is symmetric in the samples") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(3 + rng() % 15), b(3 + rng() % 15);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng) + 0.5;
    CHECK(mann_whitney_u(a, b).p == mann_whitney_u(b, a).p);
  }
}

TEST_CASE("Benjamini-Hochberg") {
  const std::vector<double> p = {0.01, 0.04, 0.03, 0.005};
  CHECK(benjamini_hochberg(p, 0.05) == std::vector<bool>{true, true, true, true});
  const std::vector<double> q = {0.01, 0.02, 0.5};
  CHECK(benjamini_hochberg(q, 0.05) == std::vector<bool>{true, true, false});
  const std::vector<double> none = {0.2, 0.3};
  CHECK(benjamini_hochberg(none, 0.05) == std::vector<bool>{false, false});
  CHECK(benjamini_hochberg(std::vector<double>{}, 0.05).empty());

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + rng() % 20);
    for (auto& x : v) x = trial % 2 ? u(rng) * 0.1 : u(rng);
    CHECK(benjamini_hochberg(v, 0.05) == testing::brute_bh(v, 0.05));
  }
}

TEST_CASE("method comparison") {
  std::map<std::string, std::vector<double>> scores = {
      {"pv", {0.70, 0.71, 0.72, 0.73, 0.74}},
      {"trusted", {0.80, 0.81, 0.82, 0.83, 0.84}},
      {"mv", {0.705, 0.715, 0.725, 0.735, 0.745}},
  };
  const auto r = compare_methods(scores, "pv");
  CHECK(r.baseline == "pv");
  CHECK(r.results.at("pv").p == 1.0);
  CHECK_FALSE(r.results.at("pv").significant);
  CHECK(r.results.at("trusted").p == doctest::Approx(2.0 / 252.0));
  CHECK(r.results.at("trusted").significant);
  CHECK_FALSE(r.results.at("mv").significant);
  CHECK_THROWS_AS(compare_methods(scores, "staple"), Error);
}
