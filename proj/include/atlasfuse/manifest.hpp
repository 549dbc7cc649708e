#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atlasfuse/fusion.hpp"
#include "atlasfuse/synth.hpp"

namespace atlasfuse {

struct ManifestAtlas {
  std::optional<std::string> image;
  std::string labels;
  std::optional<std::string> mask;
  std::optional<std::string> trust_map;
};

/// Dataset description. Relative paths resolve against the manifest's directory.
struct Manifest {
  std::optional<std::string> target_image;
  std::optional<std::string> target_labels;
  std::uint16_t num_labels = 0;
  std::vector<ManifestAtlas> atlases;

  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

/// Throws BadManifest on schema errors, IoFailure when unreadable.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Loads every referenced volume. Images are skipped unless load_images.
AtlasSet load_atlas_set(const Manifest& manifest, bool load_images);

LabelVolume load_labels(const std::filesystem::path& path, std::uint16_t num_labels);

/// Writes target.{img,lab}.mav, atlasK.{img,lab}.mav (K from 1) and manifest.json.
Manifest write_dataset(const SynthDataset& dataset, const std::filesystem::path& out_dir);

}  // namespace atlasfuse
