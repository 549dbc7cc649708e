#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace atlasfuse {

struct MannWhitneyResult {
  double u_a = 0.0;  // rank-sum statistic of sample a
  double u_b = 0.0;  // n*m - u_a
  double u = 0.0;    // min(u_a, u_b)
  double p = 1.0;    // two-sided
  bool exact = false;
};

/// Samples with n + m at or below this size and no ties get an exact p-value.
inline constexpr std::size_t kExactMannWhitneyMax = 16;

/// Two-sided Mann-Whitney U with midranks. Exact null distribution for small
/// tie-free samples, otherwise the tie-corrected normal approximation with
/// continuity correction. All pooled values identical -> p = 1.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Number of rank arrangements giving each U in [0, n*m] under the null.
std::vector<double> mann_whitney_null_counts(std::size_t n, std::size_t m);

/// Benjamini-Hochberg step-up flags, in input order.
std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double fdr);

struct MethodComparison {
  double u = 0.0;
  double p = 1.0;
  bool significant = false;
};

struct ComparisonResult {
  std::string baseline;
  double alpha = 0.05;
  double fdr = 0.05;
  std::map<std::string, MethodComparison> results;
};

/// Tests every method against the baseline and applies BH across the family of
/// non-baseline methods. The baseline's own entry is p = 1, not significant.
ComparisonResult compare_methods(const std::map<std::string, std::vector<double>>& per_subject_scores,
                                 const std::string& baseline, double alpha = 0.05, double fdr = 0.05);

}  // namespace atlasfuse
