#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "atlasfuse/volume.hpp"

namespace atlasfuse {

struct StapleConfig;

struct AtlasEntry {
  std::optional<Volume> image;
  LabelVolume labels;
  std::optional<TrustMask> mask;
  std::optional<TrustMap> trust_map;
};

/// Warped atlases in target space.
struct AtlasSet {
  std::vector<AtlasEntry> atlases;
  std::optional<Volume> target_image;
  std::uint16_t num_labels = 0;

  std::size_t size() const noexcept { return atlases.size(); }
  const Dims& dims() const { return atlases.front().labels.dims(); }
  const Spacing& spacing() const { return atlases.front().labels.spacing(); }

  /// Throws IncompatibleVolumes / LabelOutOfRange / InvalidArgument.
  void validate() const;
};

struct FusionOutput {
  LabelVolume labels;
  TrustMask unassigned;
  // Vote count of the winning label per voxel (U16).
  std::optional<Volume> vote_counts;

  double unassigned_fraction() const;
};

FusionOutput plurality_vote(const AtlasSet& atlases);

/// Label l is kept where it receives strictly more than n/2 votes.
FusionOutput majority_vote(const AtlasSet& atlases);

/// Plurality over the atlases whose mask is 1 at each voxel. Atlases with only a
/// trust map are thresholded at `cut` first. Zero retained atlases -> label 0, unassigned.
FusionOutput trusted_plurality_vote(const AtlasSet& atlases, float cut = 0.5f);

/// Truth label where at least n_required atlases match it, else background + unassigned.
FusionOutput oracle_fuse(const AtlasSet& atlases, const LabelVolume& truth, std::size_t n_required);

LabelVolume combine_with_fallback(const FusionOutput& primary, const LabelVolume& fallback);

enum class FusionMethod { PV, MV, TRUSTED, ORACLE, STAPLE };

std::optional<FusionMethod> parse_fusion_method(std::string_view name);
std::string_view fusion_method_name(FusionMethod method);

struct FusionOptions {
  const LabelVolume* truth = nullptr;  // ORACLE
  std::size_t oracle_n = 1;            // ORACLE
  float cut = 0.5f;                    // TRUSTED with trust maps
  const StapleConfig* staple = nullptr;  // STAPLE; defaults when null
};

FusionOutput fuse(const AtlasSet& atlases, FusionMethod method, const FusionOptions& options = {});

}  // namespace atlasfuse
