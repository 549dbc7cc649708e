#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "atlasfuse/fusion.hpp"
#include "atlasfuse/volume.hpp"

namespace atlasfuse {

using Index3 = std::array<std::int64_t, 3>;

struct PatchWindow {
  Index3 core_origin;
  Index3 core_extent;   // clipped to the volume
  Index3 input_origin;  // core_origin - margin; may be negative
};

struct PatchGrid {
  Dims dims;
  int patch_size = 72;
  int core_size = 40;
  int margin = 16;
  std::vector<PatchWindow> windows;

  /// One line per window: `core=(x,y,z)+(dx,dy,dz) input=(x,y,z)`.
  std::string to_text() const;
};

/// 1 where the warped atlas label equals the target label.
TrustMask gen_agreement_mask(const LabelVolume& warped_atlas_labels, const LabelVolume& target_labels);

/// 0 where map < cut, 1 otherwise (a value equal to cut maps to 1).
TrustMask threshold_trust_map(const TrustMap& map, float cut = 0.5f);

/// Cores tile the volume on a stride-core_size grid from the origin, clipped at
/// the far edges; each input window extends the nominal core by the margin.
PatchGrid tile_patches(const Dims& dims, int patch_size = 72, int core_size = 40);

/// Copies core outputs (each a volume with the window's clipped core extent)
/// into place. Spacing is taken from the first tile.
Volume reconstruct_from_cores(const PatchGrid& grid, const std::vector<const Volume*>& core_outputs);

/// Extracts each window's clipped core region of a volume (inverse of reconstruct_from_cores).
std::vector<Volume> split_into_cores(const PatchGrid& grid, const Volume& volume);

struct PatchSampling {
  int patch_size = 72;
  int core_size = 40;
  double min_zero_fraction = 0.05;
  // Draw budget before giving up with SamplingExhausted: max(kMinAttempts, kAttemptsPerPatch * count).
  static constexpr std::size_t kMinAttempts = 10000;
  static constexpr std::size_t kAttemptsPerPatch = 200;
};

/// Minimum number of zero voxels a patch must contain: ceil(fraction * patch^3).
std::size_t min_zero_voxels(int patch_size, double min_zero_fraction);

/// Rejection-samples patch origins (in volume coordinates, possibly negative down
/// to -margin) whose in-volume part holds at least min_zero_voxels mask zeros.
/// Padding voxels outside the volume are never counted.
std::vector<Index3> sample_training_patches(const TrustMask& mask, std::size_t count, std::uint64_t seed,
                                            const PatchSampling& sampling = {});

enum class Similarity { NCC, MAD };

struct HeuristicConfig {
  int window_radius = 2;
  Similarity similarity = Similarity::MAD;
  // NCC: minimum map value (r+1)/2 to trust. MAD: maximum mean absolute
  // difference as a fraction of the target intensity range.
  double threshold = 0.1;

  /// Cut to apply to the produced trust map.
  float mask_cut() const;
  static HeuristicConfig ncc() { return {2, Similarity::NCC, 0.8}; }
  static HeuristicConfig mad() { return {2, Similarity::MAD, 0.1}; }
};

/// Local image similarity between target and warped atlas, mapped to [0,1].
/// NCC: (r+1)/2, with 0.5 where either window has zero variance.
/// MAD: 1 - clamp(mean|a-b| / range(target), 0, 1).
/// Windows are clipped at the volume boundary.
TrustMap heuristic_trust_predict(const Volume& target_image, const Volume& warped_atlas_image,
                                 const HeuristicConfig& config = {});

struct RecallResult {
  TrustMap map;
  std::size_t excluded = 0;  // voxels with no retained atlas
};

RecallResult recall_map(const AtlasSet& atlases, const LabelVolume& truth, bool use_masks);

struct MaskDice {
  double ones = 0.0;
  double zeros = 0.0;
};

MaskDice mask_dice(const TrustMask& predicted, const TrustMask& truth);

}  // namespace atlasfuse
