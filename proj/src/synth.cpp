#include "atlasfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace atlasfuse {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t { kPlacement = 1, kTargetNoise = 2, kAtlasField = 1000, kAtlasNoise = 1'000'000 };

}  // namespace

void SynthConfig::validate() const {
  VolumeHeader{dims, spacing, DType::F32}.validate();
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < kMinAxis) throw Error(Errc::InvalidArgument, "each axis must be >= 16 voxels");
  }
  if (num_structures < 1) throw Error(Errc::InvalidArgument, "num_structures must be >= 1");
  if (num_atlases < 1) throw Error(Errc::InvalidArgument, "num_atlases must be >= 1");
  if (!(warp_amplitude >= 0.0) || !std::isfinite(warp_amplitude)) {
    throw Error(Errc::InvalidArgument, "warp amplitude must be >= 0");
  }
  if (!(warp_smoothness > 0.0) || !std::isfinite(warp_smoothness)) {
    throw Error(Errc::InvalidArgument, "warp smoothness must be > 0");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw Error(Errc::InvalidArgument, "noise must be >= 0");
}

float SynthConfig::intensity(std::uint16_t label) const {
  return static_cast<float>(0.2 + 0.8 * static_cast<double>(label) / static_cast<double>(num_structures));
}

namespace {

struct Ellipsoid {
  double c[3];
  double r[3];
  bool contains(double x, double y, double z) const {
    const double dx = (x - c[0]) / r[0], dy = (y - c[1]) / r[1], dz = (z - c[2]) / r[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
  double bound() const { return std::max({r[0], r[1], r[2]}); }
};

Ellipsoid head_of(const Dims& d) {
  Ellipsoid h{};
  for (int a = 0; a < 3; ++a) {
    h.c[a] = (static_cast<double>(d[a]) - 1.0) / 2.0;
    h.r[a] = 0.42 * static_cast<double>(d[a]);
  }
  return h;
}

}  // namespace

Volume phantom_clean_image(const SynthConfig& config, const LabelVolume& labels) {
  const Ellipsoid head = head_of(config.dims);
  Volume img = Volume::zeros(config.dims, config.spacing, DType::F32);
  auto v = img.data<float>();
  const auto lab = labels.labels();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto c = config.dims.coords(i);
    if (lab[i] != 0) {
      v[i] = config.intensity(lab[i]);
    } else if (head.contains(static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2]))) {
      v[i] = config.intensity(0);
    }
  }
  return img;
}

namespace {

void add_noise(Volume& img, double stddev, std::uint64_t seed) {
  if (stddev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  for (auto& x : img.data<float>()) x = static_cast<float>(x + noise(rng));
}

}  // namespace

Phantom make_phantom(const SynthConfig& config) {
  config.validate();
  const Dims& d = config.dims;
  const Ellipsoid head = head_of(d);
  const double min_dim = static_cast<double>(std::min({d.nx, d.ny, d.nz}));
  std::mt19937_64 rng(derive_seed(config.seed, kPlacement));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Ellipsoid> structures;
  constexpr int kAttempts = 5000;
  for (std::uint16_t s = 0; s < config.num_structures; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      Ellipsoid e{};
      for (int a = 0; a < 3; ++a) e.r[a] = min_dim * (0.08 + 0.08 * unit(rng));
      for (int a = 0; a < 3; ++a) {
        e.c[a] = head.c[a] + (2.0 * unit(rng) - 1.0) * std::max(0.0, head.r[a] - e.bound() - 1.0);
      }
      // Bounding sphere must stay inside the head ellipsoid (shrunk by the sphere radius).
      double inside = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double room = head.r[a] - e.bound() - 1.0;
        if (room <= 0.0) {
          inside = 2.0;
          break;
        }
        inside += ((e.c[a] - head.c[a]) / room) * ((e.c[a] - head.c[a]) / room);
      }
      if (inside > 1.0) continue;
      bool clear = true;
      for (const auto& o : structures) {
        double dist2 = 0.0;
        for (int a = 0; a < 3; ++a) dist2 += (e.c[a] - o.c[a]) * (e.c[a] - o.c[a]);
        if (std::sqrt(dist2) <= e.bound() + o.bound() + 1.0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      structures.push_back(e);
      placed = true;
    }
    if (!placed) {
      throw Error(Errc::TooManyStructures, "could not place structure " + std::to_string(s + 1) + " of " +
                                               std::to_string(config.num_structures));
    }
  }

  LabelVolume labels = LabelVolume::zeros(d, config.spacing, config.num_structures);
  auto lab = labels.labels();
  std::vector<std::size_t> counts(config.num_structures + 1u, 0);
  for (std::size_t i = 0; i < lab.size(); ++i) {
    const auto c = d.coords(i);
    for (std::size_t s = 0; s < structures.size(); ++s) {
      if (structures[s].contains(static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2]))) {
        lab[i] = static_cast<std::uint16_t>(s + 1);
        ++counts[s + 1];
        break;
      }
    }
  }
  for (std::size_t s = 1; s < counts.size(); ++s) {
    if (counts[s] == 0) throw Error(Errc::TooManyStructures, "structure " + std::to_string(s) + " has no voxels");
  }
  Volume image = phantom_clean_image(config, labels);
  add_noise(image, config.noise_std, derive_seed(config.seed, kTargetNoise));
  return {std::move(image), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Displacement fields

double DisplacementField::max_magnitude() const {
  const auto x = ux.data<float>(), y = uy.data<float>(), z = uz.data<float>();
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = std::sqrt(static_cast<double>(x[i]) * x[i] + static_cast<double>(y[i]) * y[i] +
                               static_cast<double>(z[i]) * z[i]);
    best = std::max(best, m);
  }
  return best;
}

namespace {

// Separable Gaussian, clamp-to-edge boundary.
void gaussian_smooth(std::vector<double>& v, const Dims& d, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    sum += kernel[k + radius];
  }
  for (auto& k : kernel) k /= sum;
  std::vector<double> line;
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t len = static_cast<std::int64_t>(d[axis]);
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
    const std::size_t lines = d.count() / static_cast<std::size_t>(len);
    line.resize(static_cast<std::size_t>(len));
    for (std::size_t l = 0; l < lines; ++l) {
      std::size_t base;
      if (axis == 0) {
        base = l * d.nx;
      } else if (axis == 1) {
        base = (l % d.nx) + (l / d.nx) * d.nx * d.ny;
      } else {
        base = l;
      }
      for (std::int64_t i = 0; i < len; ++i) line[i] = v[base + i * stride];
      for (std::int64_t i = 0; i < len; ++i) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const std::int64_t j = std::clamp<std::int64_t>(i + k, 0, len - 1);
          acc += kernel[k + radius] * line[j];
        }
        v[base + i * stride] = acc;
      }
    }
  }
}

}  // namespace

DisplacementField random_displacement_field(const Dims& dims, double amplitude, double smoothness, std::uint64_t seed,
                                            const Spacing& spacing) {
  if (!(amplitude >= 0.0)) throw Error(Errc::InvalidArgument, "amplitude must be >= 0");
  if (!(smoothness > 0.0)) throw Error(Errc::InvalidArgument, "smoothness must be > 0");
  const std::size_t n = dims.count();
  DisplacementField f{Volume::zeros(dims, spacing, DType::F32), Volume::zeros(dims, spacing, DType::F32),
                      Volume::zeros(dims, spacing, DType::F32)};
  if (amplitude == 0.0) return f;

  // Noise is drawn on a grid padded by the kernel radius and cropped after
  // smoothing, so the field is stationary up to the volume border.
  const std::uint64_t pad = static_cast<std::uint64_t>(std::ceil(3.0 * smoothness));
  const Dims padded{dims.nx + 2 * pad, dims.ny + 2 * pad, dims.nz + 2 * pad};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> comp[3];
  std::vector<double> full(padded.count());
  for (auto& c : comp) {
    for (auto& x : full) x = normal(rng);
    gaussian_smooth(full, padded, smoothness);
    c.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = dims.coords(i);
      c[i] = full[padded.index(q[0] + pad, q[1] + pad, q[2] + pad)];
    }
  }
  double max_mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_mag = std::max(max_mag, std::sqrt(comp[0][i] * comp[0][i] + comp[1][i] * comp[1][i] + comp[2][i] * comp[2][i]));
  }
  if (max_mag == 0.0) return f;
  const double scale = amplitude / max_mag;
  Volume* out[3] = {&f.ux, &f.uy, &f.uz};
  for (int a = 0; a < 3; ++a) {
    auto v = out[a]->data<float>();
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(comp[a][i] * scale);
  }
  return f;
}

namespace {

template <typename T>
void warp_nearest(std::span<const T> in, std::span<T> out, const Dims& d, const DisplacementField& f) {
  const auto ux = f.ux.data<float>(), uy = f.uy.data<float>(), uz = f.uz.data<float>();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = d.coords(i);
    const double p[3] = {static_cast<double>(c[0]) + ux[i], static_cast<double>(c[1]) + uy[i],
                         static_cast<double>(c[2]) + uz[i]};
    std::int64_t q[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      q[a] = static_cast<std::int64_t>(std::floor(p[a] + 0.5));
      inside &= q[a] >= 0 && q[a] < static_cast<std::int64_t>(d[a]);
    }
    out[i] = inside ? in[d.index(q[0], q[1], q[2])] : T{0};
  }
}

void warp_trilinear(std::span<const float> in, std::span<float> out, const Dims& d, const DisplacementField& f) {
  const auto ux = f.ux.data<float>(), uy = f.uy.data<float>(), uz = f.uz.data<float>();
  auto sample = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> double {
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::int64_t>(d.nx) || y >= static_cast<std::int64_t>(d.ny) ||
        z >= static_cast<std::int64_t>(d.nz)) {
      return 0.0;
    }
    return in[d.index(x, y, z)];
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = d.coords(i);
    const double p[3] = {static_cast<double>(c[0]) + ux[i], static_cast<double>(c[1]) + uy[i],
                         static_cast<double>(c[2]) + uz[i]};
    std::int64_t b[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
      const double fl = std::floor(p[a]);
      b[a] = static_cast<std::int64_t>(fl);
      t[a] = p[a] - fl;
    }
    double acc = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double wz = k ? t[2] : 1.0 - t[2];
      if (wz == 0.0) continue;
      for (int j = 0; j < 2; ++j) {
        const double wy = j ? t[1] : 1.0 - t[1];
        if (wy == 0.0) continue;
        for (int l = 0; l < 2; ++l) {
          const double wx = l ? t[0] : 1.0 - t[0];
          if (wx == 0.0) continue;
          acc += wx * wy * wz * sample(b[0] + l, b[1] + j, b[2] + k);
        }
      }
    }
    out[i] = static_cast<float>(acc);
  }
}

}  // namespace

Volume warp_volume(const Volume& input, const DisplacementField& field) {
  if (input.dims() != field.dims() || field.uy.dims() != field.dims() || field.uz.dims() != field.dims()) {
    throw Error(Errc::IncompatibleVolumes, "displacement field dims differ from the input");
  }
  Volume out = Volume::zeros(input.dims(), input.spacing(), input.dtype());
  switch (input.dtype()) {
    case DType::F32: warp_trilinear(input.data<float>(), out.data<float>(), input.dims(), field); break;
    case DType::U16:
      warp_nearest<std::uint16_t>(input.data<std::uint16_t>(), out.data<std::uint16_t>(), input.dims(), field);
      break;
    case DType::U8:
      warp_nearest<std::uint8_t>(input.data<std::uint8_t>(), out.data<std::uint8_t>(), input.dims(), field);
      break;
  }
  return out;
}

LabelVolume warp_volume(const LabelVolume& input, const DisplacementField& field) {
  return LabelVolume(warp_volume(input.volume(), field), input.num_labels());
}

SynthDataset simulate_atlas_set(const SynthConfig& config) {
  Phantom phantom = make_phantom(config);
  const Volume clean = phantom_clean_image(config, phantom.labels);
  SynthDataset ds{std::move(phantom.image), phantom.labels, {}};
  ds.atlases.num_labels = config.num_structures;
  for (std::size_t i = 0; i < config.num_atlases; ++i) {
    const auto field = random_displacement_field(config.dims, config.warp_amplitude, config.warp_smoothness,
                                                 derive_seed(config.seed, kAtlasField + i), config.spacing);
    AtlasEntry entry;
    entry.labels = warp_volume(ds.target_labels, field);
    Volume img = warp_volume(clean, field);
    add_noise(img, config.noise_std, derive_seed(config.seed, kAtlasNoise + i));
    entry.image = std::move(img);
    ds.atlases.atlases.push_back(std::move(entry));
  }
  ds.atlases.target_image = ds.target_image;
  return ds;
}

}  // namespace atlasfuse
