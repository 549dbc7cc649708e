#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atlasfuse/volume.hpp"

namespace atlasfuse {

/// Exact squared Euclidean distance (mm^2) from every voxel center to the
/// nearest voxel with features[i] != 0, honouring anisotropic spacing.
/// Separable lower-envelope-of-parabolas transform, one pass per axis.
/// Voxels are +infinity when there is no feature voxel at all.
std::vector<double> squared_distance_field(std::span<const std::uint8_t> features, const Dims& dims,
                                           const Spacing& spacing);

}  // namespace atlasfuse
