#include "atlasfuse/manifest.hpp"

#include <fstream>

#include "json.hpp"

namespace atlasfuse {

using nlohmann::json;

std::filesystem::path Manifest::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

namespace {

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw Error(Errc::BadManifest, std::string("field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::BadManifest, std::string("malformed manifest JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::BadManifest, "manifest must be a JSON object");
  Manifest m;
  m.base_dir = path.parent_path();
  m.target_image = opt_string(j, "target_image");
  m.target_labels = opt_string(j, "target_labels");
  if (!j.contains("num_labels") || !j["num_labels"].is_number_unsigned() || j["num_labels"].get<std::uint64_t>() > 0xFFFF) {
    throw Error(Errc::BadManifest, "num_labels must be an integer in [0, 65535]");
  }
  m.num_labels = j["num_labels"].get<std::uint16_t>();
  if (!j.contains("atlases") || !j["atlases"].is_array() || j["atlases"].empty()) {
    throw Error(Errc::BadManifest, "manifest needs a non-empty 'atlases' array");
  }
  for (const auto& a : j["atlases"]) {
    if (!a.is_object()) throw Error(Errc::BadManifest, "atlas entries must be objects");
    ManifestAtlas entry;
    const auto labels = opt_string(a, "labels");
    if (!labels) throw Error(Errc::BadManifest, "atlas entry without 'labels'");
    entry.labels = *labels;
    entry.image = opt_string(a, "image");
    entry.mask = opt_string(a, "mask");
    entry.trust_map = opt_string(a, "trust_map");
    m.atlases.push_back(std::move(entry));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  json j;
  if (m.target_image) j["target_image"] = *m.target_image;
  if (m.target_labels) j["target_labels"] = *m.target_labels;
  j["num_labels"] = m.num_labels;
  j["atlases"] = json::array();
  for (const auto& a : m.atlases) {
    json e;
    if (a.image) e["image"] = *a.image;
    e["labels"] = a.labels;
    if (a.mask) e["mask"] = *a.mask;
    if (a.trust_map) e["trust_map"] = *a.trust_map;
    j["atlases"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

LabelVolume load_labels(const std::filesystem::path& path, std::uint16_t num_labels) {
  return LabelVolume(read_volume(path), num_labels);
}

AtlasSet load_atlas_set(const Manifest& m, bool load_images) {
  AtlasSet set;
  set.num_labels = m.num_labels;
  for (const auto& a : m.atlases) {
    AtlasEntry e;
    e.labels = load_labels(m.resolve(a.labels), m.num_labels);
    if (load_images && a.image) e.image = read_volume(m.resolve(*a.image));
    if (a.mask) e.mask = TrustMask(read_volume(m.resolve(*a.mask)));
    if (a.trust_map) e.trust_map = TrustMap(read_volume(m.resolve(*a.trust_map)));
    set.atlases.push_back(std::move(e));
  }
  if (load_images && m.target_image) set.target_image = read_volume(m.resolve(*m.target_image));
  set.validate();
  return set;
}

Manifest write_dataset(const SynthDataset& ds, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  Manifest m;
  m.base_dir = out_dir;
  m.num_labels = ds.atlases.num_labels;
  m.target_image = "target.img.mav";
  m.target_labels = "target.lab.mav";
  write_volume(ds.target_image, out_dir / *m.target_image);
  write_volume(ds.target_labels.volume(), out_dir / *m.target_labels);
  for (std::size_t i = 0; i < ds.atlases.size(); ++i) {
    const std::string stem = "atlas" + std::to_string(i + 1);
    ManifestAtlas a;
    a.labels = stem + ".lab.mav";
    write_volume(ds.atlases.atlases[i].labels.volume(), out_dir / a.labels);
    if (ds.atlases.atlases[i].image) {
      a.image = stem + ".img.mav";
      write_volume(*ds.atlases.atlases[i].image, out_dir / *a.image);
    }
    m.atlases.push_back(std::move(a));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace atlasfuse
