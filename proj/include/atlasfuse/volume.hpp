#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "atlasfuse/error.hpp"

namespace atlasfuse {

enum class DType : std::uint8_t { U8 = 1, U16 = 2, F32 = 3 };

std::size_t dtype_width(DType t) noexcept;

struct Dims {
  std::uint64_t nx = 1, ny = 1, nz = 1;

  std::size_t count() const noexcept { return static_cast<std::size_t>(nx * ny * nz); }
  std::size_t index(std::uint64_t x, std::uint64_t y, std::uint64_t z) const noexcept {
    return static_cast<std::size_t>(x + nx * (y + ny * z));
  }
  std::array<std::uint64_t, 3> coords(std::size_t i) const noexcept {
    return {i % nx, (i / nx) % ny, i / (nx * ny)};
  }
  std::uint64_t operator[](int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double sx = 1.0, sy = 1.0, sz = 1.0;

  double operator[](int axis) const noexcept { return axis == 0 ? sx : axis == 1 ? sy : sz; }
  // Bitwise equality; -0.0 and 0.0 differ, which cannot occur for valid spacings.
  bool same_bits(const Spacing& o) const noexcept;
};

struct VolumeHeader {
  Dims dims;
  Spacing spacing;
  DType dtype = DType::U8;

  /// Throws InvalidArgument unless dims >= 1 and spacings are positive and finite.
  void validate() const;
};

/// Dense 3D scalar grid, x-fastest. The element type is fixed by the header dtype.
class Volume {
 public:
  using Storage = std::variant<std::vector<std::uint8_t>, std::vector<std::uint16_t>, std::vector<float>>;

  Volume() : Volume(VolumeHeader{}) {}
  explicit Volume(const VolumeHeader& header);
  Volume(const VolumeHeader& header, Storage data);

  static Volume zeros(const Dims& dims, const Spacing& spacing, DType dtype) {
    return Volume(VolumeHeader{dims, spacing, dtype});
  }

  const VolumeHeader& header() const noexcept { return header_; }
  const Dims& dims() const noexcept { return header_.dims; }
  const Spacing& spacing() const noexcept { return header_.spacing; }
  DType dtype() const noexcept { return header_.dtype; }
  std::size_t size() const noexcept { return header_.dims.count(); }

  template <typename T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(data_);
  }
  template <typename T>
  std::span<T> data() {
    return std::get<std::vector<T>>(data_);
  }

  /// Element i widened to double regardless of dtype.
  double value(std::size_t i) const;

  bool operator==(const Volume& o) const;

 private:
  VolumeHeader header_;
  Storage data_;
};

/// U16 volume whose values lie in {0..num_labels}.
class LabelVolume {
 public:
  LabelVolume() = default;
  LabelVolume(Volume volume, std::uint16_t num_labels);

  static LabelVolume zeros(const Dims& dims, const Spacing& spacing, std::uint16_t num_labels) {
    return LabelVolume(Volume::zeros(dims, spacing, DType::U16), num_labels);
  }

  const Volume& volume() const noexcept { return volume_; }
  std::uint16_t num_labels() const noexcept { return num_labels_; }
  std::span<const std::uint16_t> labels() const { return volume_.data<std::uint16_t>(); }
  std::span<std::uint16_t> labels() { return volume_.data<std::uint16_t>(); }
  const Dims& dims() const noexcept { return volume_.dims(); }
  const Spacing& spacing() const noexcept { return volume_.spacing(); }
  std::size_t size() const noexcept { return volume_.size(); }

  bool operator==(const LabelVolume& o) const { return volume_ == o.volume_; }

 private:
  Volume volume_;
  std::uint16_t num_labels_ = 0;
};

/// U8 volume with values in {0,1}.
class TrustMask {
 public:
  TrustMask() = default;
  explicit TrustMask(Volume volume);

  static TrustMask filled(const Dims& dims, const Spacing& spacing, std::uint8_t value);

  const Volume& volume() const noexcept { return volume_; }
  std::span<const std::uint8_t> values() const { return volume_.data<std::uint8_t>(); }
  std::span<std::uint8_t> values() { return volume_.data<std::uint8_t>(); }
  const Dims& dims() const noexcept { return volume_.dims(); }
  std::size_t size() const noexcept { return volume_.size(); }
  std::size_t count_ones() const;

  bool operator==(const TrustMask& o) const { return volume_ == o.volume_; }

 private:
  Volume volume_;
};

/// F32 volume with values in [0,1].
class TrustMap {
 public:
  TrustMap() = default;
  explicit TrustMap(Volume volume);

  const Volume& volume() const noexcept { return volume_; }
  std::span<const float> values() const { return volume_.data<float>(); }
  const Dims& dims() const noexcept { return volume_.dims(); }
  std::size_t size() const noexcept { return volume_.size(); }

 private:
  Volume volume_;
};

inline constexpr std::size_t kMav1HeaderBytes = 56;

Volume read_volume(const std::filesystem::path& path);
void write_volume(const Volume& volume, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_volume(const Volume& volume);
Volume decode_volume(std::span<const std::uint8_t> bytes);

/// Succeeds iff every volume shares dims and bitwise spacing with the first.
/// Throws DimsMismatch or SpacingMismatch.
void validate_compatible(std::span<const Volume* const> volumes);
void validate_compatible(const Volume& a, const Volume& b);

/// Same check as validate_compatible but reported as IncompatibleVolumes.
void require_compatible(const Volume& a, const Volume& b, const char* context);

}  // namespace atlasfuse
