#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "atlasfuse/volume.hpp"

namespace atlasfuse {

struct BoundaryPointSet {
  std::vector<std::array<std::uint64_t, 3>> points;
  Spacing spacing;
};

/// Structure voxels with at least one 6-neighbour outside the structure or the volume.
BoundaryPointSet extract_boundary(const LabelVolume& labels, std::uint16_t label);

/// 2|P n T| / (|P| + |T|); 1.0 when both sets are empty.
double volume_dice(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label);

// The surface metrics below throw EmptyStructure if either structure is empty.

/// Mean of the pooled boundary-to-boundary nearest distances, both directions.
double avg_surface_distance(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label);

/// Fraction of boundary points (both sides) within tol_mm of the other boundary.
double surface_dice(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label, double tol_mm = 1.0);

/// Boundary-to-solid Hausdorff distance (equal to the solid-set Hausdorff distance).
double hausdorff(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label);

/// Nearest-rank 95th percentile of the pooled boundary-to-solid distances.
double dist95(const LabelVolume& pred, const LabelVolume& truth, std::uint16_t label);

/// Value at 1-based rank ceil(q * k) of the ascending sort.
double nearest_rank_percentile(std::vector<double> values, double q);

struct StructureMetrics {
  double volume_dice = 0.0;
  std::optional<double> avg_surface_dist_mm;
  std::optional<double> surface_dice;
  std::optional<double> hausdorff_mm;
  std::optional<double> dist95_mm;
};

struct MetricSummary {
  std::optional<double> volume_dice, avg_surface_dist_mm, surface_dice, hausdorff_mm, dist95_mm;
};

struct MetricsReport {
  double tolerance_mm = 1.0;
  std::map<std::uint16_t, StructureMetrics> structures;  // non-excluded labels
  std::vector<std::uint16_t> included;
  std::vector<std::uint16_t> excluded;  // empty in both volumes
  MetricSummary aggregate;              // unweighted mean over defined values
  MetricSummary aggregate_std;          // population std over structures
};

/// All five metrics for every label 1..N (background excluded).
MetricsReport evaluate_all(const LabelVolume& pred, const LabelVolume& truth, double tol_mm = 1.0);

}  // namespace atlasfuse
