#include <fstream>

#include "atlasfuse/manifest.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace atlasfuse;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

Errc load_error(const std::filesystem::path& p) {
  try {
    load_manifest(p);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::BadInput;
}

}  // namespace

TEST_CASE("dataset round-trip through the manifest") {
  const auto dir = testing::temp_dir("manifest_rt");
  SynthConfig c;
  c.dims = {20, 20, 20};
  c.num_atlases = 3;
  c.num_structures = 2;
  const auto ds = simulate_atlas_set(c);
  write_dataset(ds, dir);
  const Manifest m = load_manifest(dir / "manifest.json");
  CHECK(m.num_labels == 2);
  REQUIRE(m.atlases.size() == 3);
  CHECK(m.atlases[0].labels == "atlas1.lab.mav");
  CHECK(*m.atlases[2].image == "atlas3.img.mav");
  CHECK(*m.target_labels == "target.lab.mav");
  const AtlasSet set = load_atlas_set(m, true);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(set.atlases[i].labels == ds.atlases.atlases[i].labels);
    CHECK(*set.atlases[i].image == *ds.atlases.atlases[i].image);
  }
  CHECK(*set.target_image == ds.target_image);

  Manifest edited = m;
  edited.atlases[1].mask = "x.mask.mav";
  save_manifest(edited, dir / "m2.json");
  const Manifest back = load_manifest(dir / "m2.json");
  CHECK(*back.atlases[1].mask == "x.mask.mav");
  CHECK_FALSE(back.atlases[0].mask.has_value());
}

TEST_CASE("manifest errors") {
  const auto dir = testing::temp_dir("manifest_err");
  CHECK(load_error(dir / "missing.json") == Errc::IoFailure);
  write_text(dir / "bad.json", "{ not json");
  CHECK(load_error(dir / "bad.json") == Errc::BadManifest);
  write_text(dir / "noatlas.json", R"({"num_labels": 2, "atlases": []})");
  CHECK(load_error(dir / "noatlas.json") == Errc::BadManifest);
  write_text(dir / "nolabels.json", R"({"num_labels": 2, "atlases": [{"image": "a.mav"}]})");
  CHECK(load_error(dir / "nolabels.json") == Errc::BadManifest);
  write_text(dir / "badn.json", R"({"num_labels": -1, "atlases": [{"labels": "a.mav"}]})");
  CHECK(load_error(dir / "badn.json") == Errc::BadManifest);
}
