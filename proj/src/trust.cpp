#include "atlasfuse/trust.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "atlasfuse/kernels.hpp"
#include "atlasfuse/parallel.hpp"

namespace atlasfuse {

TrustMask gen_agreement_mask(const LabelVolume& warped_atlas_labels, const LabelVolume& target_labels) {
  require_compatible(warped_atlas_labels.volume(), target_labels.volume(), "agreement mask");
  Volume out = Volume::zeros(target_labels.dims(), target_labels.spacing(), DType::U8);
  const auto a = warped_atlas_labels.labels();
  const auto b = target_labels.labels();
  auto o = out.data<std::uint8_t>();
  const auto& k = kernels::active();
  parallel_chunks(o.size(), kDefaultChunk, [&](std::size_t begin, std::size_t end) {
    k.equal_mask(a.data() + begin, b.data() + begin, o.data() + begin, end - begin);
  });
  return TrustMask(std::move(out));
}

TrustMask threshold_trust_map(const TrustMap& map, float cut) {
  if (!std::isfinite(cut)) throw Error(Errc::OutOfRangeValue, "cut must be finite");
  Volume out = Volume::zeros(map.dims(), map.volume().spacing(), DType::U8);
  const auto in = map.values();
  auto o = out.data<std::uint8_t>();
  const auto& k = kernels::active();
  parallel_chunks(o.size(), kDefaultChunk, [&](std::size_t begin, std::size_t end) {
    k.threshold(in.data() + begin, cut, o.data() + begin, end - begin);
  });
  return TrustMask(std::move(out));
}

// ---------------------------------------------------------------------------
// Patch tiling

std::string PatchGrid::to_text() const {
  std::ostringstream os;
  for (const auto& w : windows) {
    os << "core=(" << w.core_origin[0] << ',' << w.core_origin[1] << ',' << w.core_origin[2] << ")+("
       << w.core_extent[0] << ',' << w.core_extent[1] << ',' << w.core_extent[2] << ") input=(" << w.input_origin[0]
       << ',' << w.input_origin[1] << ',' << w.input_origin[2] << ")\n";
  }
  return os.str();
}

namespace {

void check_patch_spec(int patch_size, int core_size) {
  if (core_size < 1 || patch_size <= core_size) {
    throw Error(Errc::BadPatchSpec, "need 1 <= core_size < patch_size");
  }
  if ((patch_size - core_size) % 2 != 0) throw Error(Errc::BadPatchSpec, "patch_size - core_size must be even");
}

}  // namespace

PatchGrid tile_patches(const Dims& dims, int patch_size, int core_size) {
  check_patch_spec(patch_size, core_size);
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw Error(Errc::InvalidArgument, "dims must be >= 1");
  PatchGrid grid{dims, patch_size, core_size, (patch_size - core_size) / 2, {}};
  const std::int64_t c = core_size;
  std::array<std::int64_t, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = (static_cast<std::int64_t>(dims[a]) + c - 1) / c;
  for (std::int64_t k = 0; k < n[2]; ++k) {
    for (std::int64_t j = 0; j < n[1]; ++j) {
      for (std::int64_t i = 0; i < n[0]; ++i) {
        PatchWindow w{};
        const std::int64_t idx[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          w.core_origin[a] = idx[a] * c;
          w.core_extent[a] = std::min<std::int64_t>(c, static_cast<std::int64_t>(dims[a]) - w.core_origin[a]);
          w.input_origin[a] = w.core_origin[a] - grid.margin;
        }
        grid.windows.push_back(w);
      }
    }
  }
  return grid;
}

namespace {

template <typename T>
void copy_block(std::span<const T> src, const Dims& src_dims, const Index3& src_origin, std::span<T> dst,
                const Dims& dst_dims, const Index3& dst_origin, const Index3& extent) {
  for (std::int64_t z = 0; z < extent[2]; ++z) {
    for (std::int64_t y = 0; y < extent[1]; ++y) {
      const std::size_t s = src_dims.index(src_origin[0], src_origin[1] + y, src_origin[2] + z);
      const std::size_t d = dst_dims.index(dst_origin[0], dst_origin[1] + y, dst_origin[2] + z);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s), extent[0], dst.begin() + static_cast<std::ptrdiff_t>(d));
    }
  }
}

template <typename T>
void copy_block(const Volume& src, const Index3& src_origin, Volume& dst, const Index3& dst_origin,
                const Index3& extent) {
  copy_block<T>(src.data<T>(), src.dims(), src_origin, dst.data<T>(), dst.dims(), dst_origin, extent);
}

void copy_any(const Volume& src, const Index3& so, Volume& dst, const Index3& d_o, const Index3& ext) {
  switch (src.dtype()) {
    case DType::U8: copy_block<std::uint8_t>(src, so, dst, d_o, ext); break;
    case DType::U16: copy_block<std::uint16_t>(src, so, dst, d_o, ext); break;
    case DType::F32: copy_block<float>(src, so, dst, d_o, ext); break;
  }
}

}  // namespace

Volume reconstruct_from_cores(const PatchGrid& grid, const std::vector<const Volume*>& core_outputs) {
  if (core_outputs.size() < grid.windows.size()) {
    throw Error(Errc::MissingTile, "expected " + std::to_string(grid.windows.size()) + " tiles, got " +
                                       std::to_string(core_outputs.size()));
  }
  if (core_outputs.size() > grid.windows.size()) throw Error(Errc::ExtentMismatch, "more tiles than windows");
  for (std::size_t i = 0; i < core_outputs.size(); ++i) {
    if (core_outputs[i] == nullptr) throw Error(Errc::MissingTile, "tile " + std::to_string(i) + " missing");
  }
  const Volume& first = *core_outputs.front();
  Volume out = Volume::zeros(grid.dims, first.spacing(), first.dtype());
  for (std::size_t i = 0; i < grid.windows.size(); ++i) {
    const auto& w = grid.windows[i];
    const Volume& tile = *core_outputs[i];
    const Dims expected{static_cast<std::uint64_t>(w.core_extent[0]), static_cast<std::uint64_t>(w.core_extent[1]),
                        static_cast<std::uint64_t>(w.core_extent[2])};
    if (tile.dims() != expected || tile.dtype() != first.dtype()) {
      throw Error(Errc::ExtentMismatch, "tile " + std::to_string(i) + " does not match its core extent");
    }
    copy_any(tile, {0, 0, 0}, out, w.core_origin, w.core_extent);
  }
  return out;
}

std::vector<Volume> split_into_cores(const PatchGrid& grid, const Volume& volume) {
  if (volume.dims() != grid.dims) throw Error(Errc::IncompatibleVolumes, "volume dims differ from the grid");
  std::vector<Volume> tiles;
  tiles.reserve(grid.windows.size());
  for (const auto& w : grid.windows) {
    Volume tile = Volume::zeros({static_cast<std::uint64_t>(w.core_extent[0]),
                                 static_cast<std::uint64_t>(w.core_extent[1]),
                                 static_cast<std::uint64_t>(w.core_extent[2])},
                                volume.spacing(), volume.dtype());
    copy_any(volume, w.core_origin, tile, {0, 0, 0}, w.core_extent);
    tiles.push_back(std::move(tile));
  }
  return tiles;
}

// ---------------------------------------------------------------------------
// Training patch sampling

std::size_t min_zero_voxels(int patch_size, double min_zero_fraction) {
  const double cube = static_cast<double>(patch_size) * patch_size * patch_size;
  return static_cast<std::size_t>(std::ceil(min_zero_fraction * cube - 1e-9));
}

std::vector<Index3> sample_training_patches(const TrustMask& mask, std::size_t count, std::uint64_t seed,
                                            const PatchSampling& sampling) {
  check_patch_spec(sampling.patch_size, sampling.core_size);
  const std::int64_t P = sampling.patch_size;
  const std::int64_t margin = (sampling.patch_size - sampling.core_size) / 2;
  const Dims& d = mask.dims();
  for (int a = 0; a < 3; ++a) {
    if (static_cast<std::int64_t>(d[a]) + 2 * margin < P) {
      throw Error(Errc::InvalidArgument, "volume too small to host a padded patch");
    }
  }
  // Summed-volume table of zero voxels, (nx+1)(ny+1)(nz+1).
  const std::size_t sx = d.nx + 1, sy = d.ny + 1, sz = d.nz + 1;
  std::vector<std::uint64_t> sat(sx * sy * sz, 0);
  auto at = [&](std::size_t x, std::size_t y, std::size_t z) -> std::uint64_t& { return sat[x + sx * (y + sy * z)]; };
  const auto m = mask.values();
  for (std::size_t z = 1; z < sz; ++z) {
    for (std::size_t y = 1; y < sy; ++y) {
      for (std::size_t x = 1; x < sx; ++x) {
        const std::uint64_t v = m[d.index(x - 1, y - 1, z - 1)] == 0;
        at(x, y, z) = v + at(x - 1, y, z) + at(x, y - 1, z) + at(x, y, z - 1) - at(x - 1, y - 1, z) -
                      at(x - 1, y, z - 1) - at(x, y - 1, z - 1) + at(x - 1, y - 1, z - 1);
      }
    }
  }
  auto zeros_in = [&](const Index3& o) {
    std::size_t lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = static_cast<std::size_t>(std::clamp<std::int64_t>(o[a], 0, static_cast<std::int64_t>(d[a])));
      hi[a] = static_cast<std::size_t>(std::clamp<std::int64_t>(o[a] + P, 0, static_cast<std::int64_t>(d[a])));
    }
    return at(hi[0], hi[1], hi[2]) - at(lo[0], hi[1], hi[2]) - at(hi[0], lo[1], hi[2]) - at(hi[0], hi[1], lo[2]) +
           at(lo[0], lo[1], hi[2]) + at(lo[0], hi[1], lo[2]) + at(hi[0], lo[1], lo[2]) - at(lo[0], lo[1], lo[2]);
  };

  const std::size_t needed = min_zero_voxels(sampling.patch_size, sampling.min_zero_fraction);
  const std::size_t max_attempts = std::max(PatchSampling::kMinAttempts, PatchSampling::kAttemptsPerPatch * count);
  std::mt19937_64 rng(seed);
  std::array<std::uniform_int_distribution<std::int64_t>, 3> dist;
  for (int a = 0; a < 3; ++a) {
    dist[a] = std::uniform_int_distribution<std::int64_t>(-margin, static_cast<std::int64_t>(d[a]) + margin - P);
  }
  std::vector<Index3> accepted;
  accepted.reserve(count);
  for (std::size_t attempt = 0; accepted.size() < count; ++attempt) {
    if (attempt >= max_attempts) {
      throw Error(Errc::SamplingExhausted, "accepted " + std::to_string(accepted.size()) + " of " +
                                               std::to_string(count) + " patches after " +
                                               std::to_string(max_attempts) + " draws");
    }
    Index3 o{dist[0](rng), dist[1](rng), dist[2](rng)};
    if (zeros_in(o) >= needed) accepted.push_back(o);
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Heuristic trust predictor

float HeuristicConfig::mask_cut() const {
  return similarity == Similarity::NCC ? static_cast<float>(threshold) : static_cast<float>(1.0 - threshold);
}

namespace {

// In-place clipped box sum along one axis with radius r.
void box_sum_axis(std::vector<double>& v, const Dims& d, int axis, int r) {
  const std::size_t len = d[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
  const std::size_t lines = d.count() / len;
  parallel_chunks(lines, 256, [&](std::size_t begin, std::size_t end) {
    std::vector<double> prefix(len + 1);
    for (std::size_t line = begin; line < end; ++line) {
      std::size_t base;
      if (axis == 0) {
        base = line * d.nx;
      } else if (axis == 1) {
        base = (line % d.nx) + (line / d.nx) * d.nx * d.ny;
      } else {
        base = line;
      }
      prefix[0] = 0.0;
      for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + v[base + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t lo = i >= static_cast<std::size_t>(r) ? i - r : 0;
        const std::size_t hi = std::min(len, i + r + 1);
        v[base + i * stride] = prefix[hi] - prefix[lo];
      }
    }
  });
}

std::vector<double> box_sum(std::vector<double> v, const Dims& d, int r) {
  for (int axis = 0; axis < 3; ++axis) box_sum_axis(v, d, axis, r);
  return v;
}

double clipped_count(const Dims& d, std::size_t i, int r) {
  const auto c = d.coords(i);
  double count = 1.0;
  for (int a = 0; a < 3; ++a) {
    const std::int64_t lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(c[a]) - r);
    const std::int64_t hi = std::min<std::int64_t>(static_cast<std::int64_t>(d[a]) - 1, static_cast<std::int64_t>(c[a]) + r);
    count *= static_cast<double>(hi - lo + 1);
  }
  return count;
}

}  // namespace

TrustMap heuristic_trust_predict(const Volume& target_image, const Volume& warped_atlas_image,
                                 const HeuristicConfig& config) {
  require_compatible(target_image, warped_atlas_image, "heuristic trust");
  if (target_image.dtype() != DType::F32 || warped_atlas_image.dtype() != DType::F32) {
    throw Error(Errc::BadDtype, "heuristic trust prediction needs F32 images");
  }
  if (config.window_radius < 1) throw Error(Errc::InvalidArgument, "window_radius must be >= 1");
  const Dims& d = target_image.dims();
  const std::size_t n = d.count();
  const auto a = target_image.data<float>();
  const auto b = warped_atlas_image.data<float>();
  const int r = config.window_radius;

  Volume out = Volume::zeros(d, target_image.spacing(), DType::F32);
  auto o = out.data<float>();

  if (config.similarity == Similarity::MAD) {
    const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    double range = static_cast<double>(*hi) - static_cast<double>(*lo);
    if (range <= 0.0) range = 1.0;
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    diff = box_sum(std::move(diff), d, r);
    for (std::size_t i = 0; i < n; ++i) {
      const double mad = diff[i] / clipped_count(d, i, r);
      o[i] = static_cast<float>(1.0 - std::clamp(mad / range, 0.0, 1.0));
    }
    return TrustMap(std::move(out));
  }

  // NCC on mean-centred images to limit cancellation in the variance terms.
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  std::vector<double> sa(n), sb(n), saa(n), sbb(n), sab(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i] - ma, y = b[i] - mb;
    sa[i] = x;
    sb[i] = y;
    saa[i] = x * x;
    sbb[i] = y * y;
    sab[i] = x * y;
  }
  sa = box_sum(std::move(sa), d, r);
  sb = box_sum(std::move(sb), d, r);
  saa = box_sum(std::move(saa), d, r);
  sbb = box_sum(std::move(sbb), d, r);
  sab = box_sum(std::move(sab), d, r);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = clipped_count(d, i, r);
    const double mx = sa[i] / c, my = sb[i] / c;
    const double vx = saa[i] / c - mx * mx;
    const double vy = sbb[i] / c - my * my;
    const double cov = sab[i] / c - mx * my;
    // Zero-variance rule: a flat window carries no similarity evidence.
    constexpr double kFlat = 1e-10;
    if (vx <= kFlat * (1.0 + saa[i] / c) || vy <= kFlat * (1.0 + sbb[i] / c)) {
      o[i] = 0.5f;
      continue;
    }
    const double rho = std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
    o[i] = static_cast<float>((rho + 1.0) / 2.0);
  }
  return TrustMap(std::move(out));
}

// ---------------------------------------------------------------------------
// Diagnostics

RecallResult recall_map(const AtlasSet& atlases, const LabelVolume& truth, bool use_masks) {
  atlases.validate();
  require_compatible(atlases.atlases.front().labels.volume(), truth.volume(), "recall truth");
  std::vector<TrustMask> owned;
  std::vector<const std::uint8_t*> masks;
  if (use_masks) {
    owned.reserve(atlases.size());
    for (std::size_t i = 0; i < atlases.size(); ++i) {
      const auto& a = atlases.atlases[i];
      if (a.mask) {
        masks.push_back(a.mask->values().data());
      } else if (a.trust_map) {
        owned.push_back(threshold_trust_map(*a.trust_map));
        masks.push_back(owned.back().values().data());
      } else {
        throw Error(Errc::MissingMask, "atlas " + std::to_string(i) + " has no mask for the recall map");
      }
    }
  }
  const std::size_t n = truth.size();
  const auto t = truth.labels();
  Volume out = Volume::zeros(truth.dims(), truth.spacing(), DType::F32);
  auto o = out.data<float>();
  std::size_t excluded = 0;
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t retained = 0, correct = 0;
    for (std::size_t i = 0; i < atlases.size(); ++i) {
      if (use_masks && masks[i][x] == 0) continue;
      ++retained;
      correct += atlases.atlases[i].labels.labels()[x] == t[x];
    }
    if (retained == 0) {
      ++excluded;
      o[x] = 0.0f;
    } else {
      o[x] = static_cast<float>(static_cast<double>(correct) / static_cast<double>(retained));
    }
  }
  return {TrustMap(std::move(out)), excluded};
}

MaskDice mask_dice(const TrustMask& predicted, const TrustMask& truth) {
  require_compatible(predicted.volume(), truth.volume(), "mask dice");
  const auto p = predicted.values();
  const auto t = truth.values();
  std::size_t p1 = 0, t1 = 0, both1 = 0, both0 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p1 += p[i];
    t1 += t[i];
    both1 += p[i] & t[i];
    both0 += (p[i] | t[i]) == 0;
  }
  const std::size_t n = p.size();
  auto dice = [](std::size_t inter, std::size_t a, std::size_t b) {
    return a + b == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
  };
  return {dice(both1, p1, t1), dice(both0, n - p1, n - t1)};
}

}  // namespace atlasfuse
