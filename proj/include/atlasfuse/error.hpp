#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atlasfuse {

enum class Errc {
  BadMagic,
  TruncatedPayload,
  BadDtype,
  NonFiniteData,
  IoFailure,
  DimsMismatch,
  SpacingMismatch,
  IncompatibleVolumes,
  InvalidArgument,
  LabelOutOfRange,
  MissingMask,
  MissingTruth,
  BadThreshold,
  UnknownMethod,
  OutOfRangeValue,
  BadPatchSpec,
  MissingTile,
  ExtentMismatch,
  SamplingExhausted,
  EmptyStructure,
  EmptySample,
  BadInput,
  UnknownBaseline,
  TooManyStructures,
  BadManifest,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace atlasfuse
