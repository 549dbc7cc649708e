#pragma once

#include <cstdint>

#include "atlasfuse/fusion.hpp"
#include "atlasfuse/volume.hpp"

namespace atlasfuse {

/// Dense displacement in voxel units; output(x) samples input(x + u(x)).
struct DisplacementField {
  Volume ux, uy, uz;  // F32, identical dims

  double max_magnitude() const;
  const Dims& dims() const { return ux.dims(); }
};

struct SynthConfig {
  Dims dims{48, 48, 48};
  Spacing spacing{1.0, 1.0, 1.0};
  std::uint16_t num_structures = 4;
  std::size_t num_atlases = 8;
  std::uint64_t seed = 7;
  double warp_amplitude = 3.0;   // max displacement magnitude, voxels
  double warp_smoothness = 4.0;  // Gaussian sigma, voxels
  double noise_std = 0.05;

  /// Each axis must be at least this long for structure placement.
  static constexpr std::uint64_t kMinAxis = 16;

  void validate() const;
  /// Noise-free intensity of a label inside the head (label 0 -> head tissue).
  float intensity(std::uint16_t label) const;
};

struct Phantom {
  Volume image;  // F32
  LabelVolume labels;
};

/// Outer head ellipsoid (label 0 tissue) holding num_structures disjoint
/// ellipsoids labelled 1..N. Deterministic in the seed.
Phantom make_phantom(const SynthConfig& config);

/// Noise-free phantom intensities (the ramp without Gaussian noise).
Volume phantom_clean_image(const SynthConfig& config, const LabelVolume& labels);

/// i.i.d. Gaussian vectors, Gaussian-smoothed with sigma = smoothness, then scaled
/// so the largest vector magnitude equals amplitude.
DisplacementField random_displacement_field(const Dims& dims, double amplitude, double smoothness, std::uint64_t seed,
                                            const Spacing& spacing = {});

/// Trilinear for F32, nearest neighbour for U8/U16. Samples outside the volume read 0.
Volume warp_volume(const Volume& input, const DisplacementField& field);
LabelVolume warp_volume(const LabelVolume& input, const DisplacementField& field);

struct SynthDataset {
  Volume target_image;
  LabelVolume target_labels;
  AtlasSet atlases;  // images + labels, no masks
};

/// One phantom target; every atlas is the target warped by its own random field
/// plus independent noise. Atlas streams are seeded from (seed, atlas index).
SynthDataset simulate_atlas_set(const SynthConfig& config);

/// SplitMix64-style mixing of a base seed with a stream id.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace atlasfuse
