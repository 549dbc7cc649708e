#include "atlasfuse/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace atlasfuse {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::BadDtype: return "BadDtype";
    case Errc::NonFiniteData: return "NonFiniteData";
    case Errc::IoFailure: return "IoFailure";
    case Errc::DimsMismatch: return "DimsMismatch";
    case Errc::SpacingMismatch: return "SpacingMismatch";
    case Errc::IncompatibleVolumes: return "IncompatibleVolumes";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::MissingMask: return "MissingMask";
    case Errc::MissingTruth: return "MissingTruth";
    case Errc::BadThreshold: return "BadThreshold";
    case Errc::UnknownMethod: return "UnknownMethod";
    case Errc::OutOfRangeValue: return "OutOfRangeValue";
    case Errc::BadPatchSpec: return "BadPatchSpec";
    case Errc::MissingTile: return "MissingTile";
    case Errc::ExtentMismatch: return "ExtentMismatch";
    case Errc::SamplingExhausted: return "SamplingExhausted";
    case Errc::EmptyStructure: return "EmptyStructure";
    case Errc::EmptySample: return "EmptySample";
    case Errc::BadInput: return "BadInput";
    case Errc::UnknownBaseline: return "UnknownBaseline";
    case Errc::TooManyStructures: return "TooManyStructures";
    case Errc::BadManifest: return "BadManifest";
  }
  return "Unknown";
}

std::size_t dtype_width(DType t) noexcept {
  switch (t) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::F32: return 4;
  }
  return 0;
}

bool Spacing::same_bits(const Spacing& o) const noexcept {
  return std::bit_cast<std::uint64_t>(sx) == std::bit_cast<std::uint64_t>(o.sx) &&
         std::bit_cast<std::uint64_t>(sy) == std::bit_cast<std::uint64_t>(o.sy) &&
         std::bit_cast<std::uint64_t>(sz) == std::bit_cast<std::uint64_t>(o.sz);
}

void VolumeHeader::validate() const {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
    throw Error(Errc::InvalidArgument, "volume dims must be >= 1");
  }
  for (int a = 0; a < 3; ++a) {
    const double s = spacing[a];
    if (!(std::isfinite(s) && s > 0.0)) throw Error(Errc::InvalidArgument, "spacing must be positive and finite");
  }
  if (dtype_width(dtype) == 0) throw Error(Errc::BadDtype, "unknown dtype");
}

namespace {

Volume::Storage make_storage(DType dtype, std::size_t n) {
  switch (dtype) {
    case DType::U8: return std::vector<std::uint8_t>(n, 0);
    case DType::U16: return std::vector<std::uint16_t>(n, 0);
    case DType::F32: return std::vector<float>(n, 0.0f);
  }
  throw Error(Errc::BadDtype, "unknown dtype");
}

std::size_t storage_size(const Volume::Storage& s) {
  return std::visit([](const auto& v) { return v.size(); }, s);
}

DType storage_dtype(const Volume::Storage& s) {
  switch (s.index()) {
    case 0: return DType::U8;
    case 1: return DType::U16;
    default: return DType::F32;
  }
}

}  // namespace

Volume::Volume(const VolumeHeader& header) : header_(header) {
  header_.validate();
  data_ = make_storage(header_.dtype, header_.dims.count());
}

Volume::Volume(const VolumeHeader& header, Storage data) : header_(header), data_(std::move(data)) {
  header_.validate();
  if (storage_dtype(data_) != header_.dtype) throw Error(Errc::BadDtype, "storage type does not match header dtype");
  if (storage_size(data_) != header_.dims.count()) {
    throw Error(Errc::TruncatedPayload, "data length does not equal nx*ny*nz");
  }
}

double Volume::value(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, data_);
}

bool Volume::operator==(const Volume& o) const {
  if (header_.dims != o.header_.dims || header_.dtype != o.header_.dtype) return false;
  if (!header_.spacing.same_bits(o.header_.spacing)) return false;
  if (header_.dtype == DType::F32) {
    // Bitwise payload comparison.
    const auto a = data<float>();
    const auto b = o.data<float>();
    return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  }
  return data_ == o.data_;
}

LabelVolume::LabelVolume(Volume volume, std::uint16_t num_labels)
    : volume_(std::move(volume)), num_labels_(num_labels) {
  if (volume_.dtype() != DType::U16) throw Error(Errc::BadDtype, "label volume must be U16");
  const auto v = volume_.data<std::uint16_t>();
  if (!v.empty() && *std::max_element(v.begin(), v.end()) > num_labels_) {
    throw Error(Errc::LabelOutOfRange, "label value exceeds num_labels " + std::to_string(num_labels_));
  }
}

TrustMask::TrustMask(Volume volume) : volume_(std::move(volume)) {
  if (volume_.dtype() != DType::U8) throw Error(Errc::BadDtype, "trust mask must be U8");
  for (auto v : volume_.data<std::uint8_t>()) {
    if (v > 1) throw Error(Errc::OutOfRangeValue, "trust mask values must be 0 or 1");
  }
}

TrustMask TrustMask::filled(const Dims& dims, const Spacing& spacing, std::uint8_t value) {
  Volume v = Volume::zeros(dims, spacing, DType::U8);
  std::ranges::fill(v.data<std::uint8_t>(), value);
  return TrustMask(std::move(v));
}

std::size_t TrustMask::count_ones() const {
  const auto v = values();
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
}

TrustMap::TrustMap(Volume volume) : volume_(std::move(volume)) {
  if (volume_.dtype() != DType::F32) throw Error(Errc::BadDtype, "trust map must be F32");
  for (float v : volume_.data<float>()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error(Errc::OutOfRangeValue, "trust map values must lie in [0,1]");
  }
}

// ---------------------------------------------------------------------------
// MAV1 encoding

namespace {

constexpr char kMagic[4] = {'M', 'A', 'V', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>(bits & 0xFF));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t b = sizeof(T); b-- > 0;) bits = static_cast<U>((bits << 8) | p[b]);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const Volume& volume) {
  const auto& h = volume.header();
  std::vector<std::uint8_t> out;
  out.reserve(kMav1HeaderBytes + volume.size() * dtype_width(h.dtype));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(h.dtype));
  out.insert(out.end(), 3, 0);
  put_le(out, h.dims.nx);
  put_le(out, h.dims.ny);
  put_le(out, h.dims.nz);
  put_le(out, h.spacing.sx);
  put_le(out, h.spacing.sy);
  put_le(out, h.spacing.sz);
  switch (h.dtype) {
    case DType::U8: {
      const auto d = volume.data<std::uint8_t>();
      out.insert(out.end(), d.begin(), d.end());
      break;
    }
    case DType::U16:
      for (auto v : volume.data<std::uint16_t>()) put_le(out, v);
      break;
    case DType::F32:
      for (auto v : volume.data<float>()) put_le(out, v);
      break;
  }
  return out;
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::BadMagic, "not a MAV1 file");
  }
  if (bytes.size() < kMav1HeaderBytes) throw Error(Errc::TruncatedPayload, "header shorter than 56 bytes");
  const std::uint8_t code = bytes[4];
  if (code < 1 || code > 3) throw Error(Errc::BadDtype, "unknown dtype code " + std::to_string(code));
  VolumeHeader h;
  h.dtype = static_cast<DType>(code);
  const std::uint8_t* p = bytes.data();
  h.dims = {get_le<std::uint64_t>(p + 8), get_le<std::uint64_t>(p + 16), get_le<std::uint64_t>(p + 24)};
  h.spacing = {get_le<double>(p + 32), get_le<double>(p + 40), get_le<double>(p + 48)};
  h.validate();

  const std::size_t width = dtype_width(h.dtype);
  // Guard the multiplication against absurd dims before comparing sizes.
  const unsigned __int128 expected =
      static_cast<unsigned __int128>(h.dims.nx) * h.dims.ny * h.dims.nz * width;
  if (expected != bytes.size() - kMav1HeaderBytes) {
    throw Error(Errc::TruncatedPayload, "payload has " + std::to_string(bytes.size() - kMav1HeaderBytes) +
                                            " bytes, header requires " +
                                            std::to_string(static_cast<std::uint64_t>(expected)));
  }
  const std::size_t n = h.dims.count();
  const std::uint8_t* payload = p + kMav1HeaderBytes;
  switch (h.dtype) {
    case DType::U8:
      return Volume(h, std::vector<std::uint8_t>(payload, payload + n));
    case DType::U16: {
      std::vector<std::uint16_t> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = get_le<std::uint16_t>(payload + 2 * i);
      return Volume(h, std::move(v));
    }
    case DType::F32: {
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = get_le<float>(payload + 4 * i);
        if (!std::isfinite(v[i])) throw Error(Errc::NonFiniteData, "NaN/Inf at voxel " + std::to_string(i));
      }
      return Volume(h, std::move(v));
    }
  }
  throw Error(Errc::BadDtype, "unknown dtype");
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoFailure, "read failed: " + path.string());
  return decode_volume(bytes);
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  const auto bytes = encode_volume(volume);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

void validate_compatible(std::span<const Volume* const> volumes) {
  if (volumes.empty()) throw Error(Errc::InvalidArgument, "validate_compatible needs at least one volume");
  const auto& ref = volumes.front()->header();
  for (std::size_t i = 1; i < volumes.size(); ++i) {
    const auto& h = volumes[i]->header();
    if (h.dims != ref.dims) throw Error(Errc::DimsMismatch, "volume " + std::to_string(i) + " dims differ");
    if (!h.spacing.same_bits(ref.spacing)) {
      throw Error(Errc::SpacingMismatch, "volume " + std::to_string(i) + " spacing differs");
    }
  }
}

void validate_compatible(const Volume& a, const Volume& b) {
  const Volume* vs[] = {&a, &b};
  validate_compatible(vs);
}

void require_compatible(const Volume& a, const Volume& b, const char* context) {
  try {
    validate_compatible(a, b);
  } catch (const Error& e) {
    throw Error(Errc::IncompatibleVolumes, std::string(context) + ": " + e.what());
  }
}

}  // namespace atlasfuse
