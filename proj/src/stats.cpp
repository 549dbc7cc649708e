#include "atlasfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "atlasfuse/error.hpp"

namespace atlasfuse {

std::vector<double> mann_whitney_null_counts(std::size_t n, std::size_t m) {
  // f(n, m, u) = f(n-1, m, u-m) + f(n, m-1, u): the largest pooled value is in
  // sample a (beats all m values of b) or in sample b.
  const std::size_t umax = n * m;
  // table[i][j] = distribution for (i, j), each of length i*j + 1.
  std::vector<std::vector<std::vector<double>>> table(n + 1, std::vector<std::vector<double>>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      auto& cur = table[i][j];
      cur.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cur[0] = 1.0;
        continue;
      }
      const auto& without_a = table[i - 1][j];
      const auto& without_b = table[i][j - 1];
      for (std::size_t u = 0; u < without_a.size(); ++u) cur[u + j] += without_a[u];
      for (std::size_t u = 0; u < without_b.size(); ++u) cur[u] += without_b[u];
    }
  }
  auto out = std::move(table[n][m]);
  out.resize(umax + 1, 0.0);
  return out;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptySample, "Mann-Whitney U needs two non-empty samples");
  for (double v : a) {
    if (!std::isfinite(v)) throw Error(Errc::BadInput, "non-finite sample value");
  }
  for (double v : b) {
    if (!std::isfinite(v)) throw Error(Errc::BadInput, "non-finite sample value");
  }
  const std::size_t n = a.size(), m = b.size(), total = n + m;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(total);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    if (j - i > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    i = j;
  }

  MannWhitneyResult r;
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  r.u_a = rank_sum_a - static_cast<double>(n) * static_cast<double>(n + 1) / 2.0;
  r.u_b = nm - r.u_a;
  r.u = std::min(r.u_a, r.u_b);

  if (pooled.front().first == pooled.back().first) {
    r.p = 1.0;
    return r;
  }

  if (!ties && total <= kExactMannWhitneyMax) {
    const auto counts = mann_whitney_null_counts(n, m);
    const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
    // u is an integer here; sum the lower tail up to it.
    const auto u_int = static_cast<std::size_t>(std::llround(r.u));
    double lower = 0.0;
    for (std::size_t u = 0; u <= u_int; ++u) lower += counts[u];
    r.p = std::min(1.0, 2.0 * lower / all);
    r.exact = true;
    return r;
  }

  const double N = static_cast<double>(total);
  const double var = nm / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
  if (!(var > 0.0)) {
    r.p = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.u_a - nm / 2.0) - 0.5) / std::sqrt(var);
  r.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double fdr) {
  if (!(fdr > 0.0 && fdr < 1.0)) throw Error(Errc::BadInput, "fdr must lie in (0,1)");
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::BadInput, "p-values must lie in [0,1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
  std::size_t k = 0;  // number of rejections
  for (std::size_t rank = m; rank >= 1; --rank) {
    if (p_values[order[rank - 1]] <= fdr * static_cast<double>(rank) / static_cast<double>(m)) {
      k = rank;
      break;
    }
  }
  std::vector<bool> flags(m, false);
  if (k == 0) return flags;
  const double cutoff = p_values[order[k - 1]];
  for (std::size_t i = 0; i < m; ++i) flags[i] = p_values[i] <= cutoff;
  return flags;
}

ComparisonResult compare_methods(const std::map<std::string, std::vector<double>>& per_subject_scores,
                                 const std::string& baseline, double alpha, double fdr) {
  if (per_subject_scores.size() < 2) throw Error(Errc::BadInput, "need at least two methods");
  const auto base = per_subject_scores.find(baseline);
  if (base == per_subject_scores.end()) throw Error(Errc::UnknownBaseline, "baseline '" + baseline + "' not found");
  ComparisonResult out{baseline, alpha, fdr, {}};
  std::vector<std::string> family;
  std::vector<double> ps;
  for (const auto& [name, scores] : per_subject_scores) {
    if (name == baseline) {
      out.results[name] = {static_cast<double>(scores.size() * scores.size()) / 2.0, 1.0, false};
      continue;
    }
    const auto r = mann_whitney_u(scores, base->second);
    out.results[name] = {r.u, r.p, false};
    family.push_back(name);
    ps.push_back(r.p);
  }
  const auto flags = benjamini_hochberg(ps, fdr);
  for (std::size_t i = 0; i < family.size(); ++i) out.results[family[i]].significant = flags[i];
  return out;
}

}  // namespace atlasfuse
