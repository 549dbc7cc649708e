#include "atlasfuse/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "atlasfuse/kernels.hpp"
#include "atlasfuse/parallel.hpp"
#include "atlasfuse/staple.hpp"
#include "atlasfuse/trust.hpp"

namespace atlasfuse {

void AtlasSet::validate() const {
  if (atlases.empty()) throw Error(Errc::InvalidArgument, "atlas set is empty");
  if (atlases.size() > 0xFFFF) throw Error(Errc::InvalidArgument, "at most 65535 atlases are supported");
  const Volume& ref = atlases.front().labels.volume();
  auto check = [&](const Volume& v, const std::string& what) { require_compatible(ref, v, what.c_str()); };
  for (std::size_t i = 0; i < atlases.size(); ++i) {
    const auto& a = atlases[i];
    const std::string tag = "atlas " + std::to_string(i);
    check(a.labels.volume(), tag + " labels");
    if (a.labels.num_labels() > num_labels) {
      // Values were validated against the entry's own N; re-check against the set's N.
      for (auto v : a.labels.labels()) {
        if (v > num_labels) throw Error(Errc::LabelOutOfRange, tag + " has label above num_labels");
      }
    }
    if (a.image) check(*a.image, tag + " image");
    if (a.mask) check(a.mask->volume(), tag + " mask");
    if (a.trust_map) check(a.trust_map->volume(), tag + " trust map");
  }
  if (target_image) check(*target_image, "target image");
}

double FusionOutput::unassigned_fraction() const {
  if (unassigned.size() == 0) return 0.0;
  return static_cast<double>(unassigned.count_ones()) / static_cast<double>(unassigned.size());
}

namespace {

struct VoteResult {
  std::vector<std::uint16_t> best_label;
  std::vector<std::uint16_t> best_count;
};

// Plurality tally restricted by optional per-atlas masks. Labels are visited in
// ascending order and only a strictly larger count replaces the current best,
// so ties go to the smallest label and atlas order is irrelevant.
VoteResult tally(const AtlasSet& set, const std::vector<const std::uint8_t*>& masks) {
  const std::size_t n = set.dims().count();
  VoteResult r{std::vector<std::uint16_t>(n, 0), std::vector<std::uint16_t>(n, 0)};
  const auto& k = kernels::active();
  parallel_chunks(n, kDefaultChunk, [&](std::size_t begin, std::size_t end) {
    const std::size_t len = end - begin;
    std::vector<std::uint16_t> counts(len);
    for (std::uint32_t l = 0; l <= set.num_labels; ++l) {
      std::fill(counts.begin(), counts.end(), std::uint16_t{0});
      for (std::size_t i = 0; i < set.size(); ++i) {
        const std::uint8_t* m = masks.empty() ? nullptr : masks[i] + begin;
        k.accumulate_label_votes(set.atlases[i].labels.labels().data() + begin, m, static_cast<std::uint16_t>(l),
                                 counts.data(), len);
      }
      k.update_argmax(counts.data(), static_cast<std::uint16_t>(l), r.best_label.data() + begin,
                      r.best_count.data() + begin, len);
    }
  });
  return r;
}

FusionOutput make_output(const AtlasSet& set, std::vector<std::uint16_t> labels, std::vector<std::uint8_t> unassigned,
                         std::vector<std::uint16_t> counts) {
  VolumeHeader h{set.dims(), set.spacing(), DType::U16};
  FusionOutput out;
  out.labels = LabelVolume(Volume(h, std::move(labels)), set.num_labels);
  out.unassigned = TrustMask(Volume({set.dims(), set.spacing(), DType::U8}, std::move(unassigned)));
  out.vote_counts = Volume(h, std::move(counts));
  return out;
}

}  // namespace

FusionOutput plurality_vote(const AtlasSet& atlases) {
  atlases.validate();
  auto r = tally(atlases, {});
  std::vector<std::uint8_t> unassigned(r.best_label.size(), 0);
  return make_output(atlases, std::move(r.best_label), std::move(unassigned), std::move(r.best_count));
}

FusionOutput majority_vote(const AtlasSet& atlases) {
  atlases.validate();
  auto r = tally(atlases, {});
  // strictly more than n/2  <=>  count >= floor(n/2) + 1
  const std::size_t needed = atlases.size() / 2 + 1;
  std::vector<std::uint8_t> unassigned(r.best_label.size(), 0);
  for (std::size_t x = 0; x < r.best_label.size(); ++x) {
    if (r.best_count[x] < needed) {
      r.best_label[x] = 0;
      unassigned[x] = 1;
    }
  }
  return make_output(atlases, std::move(r.best_label), std::move(unassigned), std::move(r.best_count));
}

FusionOutput trusted_plurality_vote(const AtlasSet& atlases, float cut) {
  atlases.validate();
  std::vector<TrustMask> thresholded;
  std::vector<const std::uint8_t*> masks;
  thresholded.reserve(atlases.size());
  for (std::size_t i = 0; i < atlases.size(); ++i) {
    const auto& a = atlases.atlases[i];
    if (a.mask) {
      masks.push_back(a.mask->values().data());
    } else if (a.trust_map) {
      thresholded.push_back(threshold_trust_map(*a.trust_map, cut));
      masks.push_back(thresholded.back().values().data());
    } else {
      throw Error(Errc::MissingMask, "atlas " + std::to_string(i) + " has neither a mask nor a trust map");
    }
  }
  auto r = tally(atlases, masks);
  std::vector<std::uint8_t> unassigned(r.best_label.size(), 0);
  for (std::size_t x = 0; x < r.best_label.size(); ++x) unassigned[x] = r.best_count[x] == 0;
  return make_output(atlases, std::move(r.best_label), std::move(unassigned), std::move(r.best_count));
}

FusionOutput oracle_fuse(const AtlasSet& atlases, const LabelVolume& truth, std::size_t n_required) {
  atlases.validate();
  require_compatible(atlases.atlases.front().labels.volume(), truth.volume(), "oracle truth");
  if (n_required < 1 || n_required > atlases.size()) {
    throw Error(Errc::BadThreshold,
                "n_required must lie in [1, " + std::to_string(atlases.size()) + "], got " + std::to_string(n_required));
  }
  const std::size_t n = truth.size();
  std::vector<std::uint16_t> counts(n, 0);
  std::vector<std::uint16_t> labels(n, 0);
  std::vector<std::uint8_t> unassigned(n, 0);
  const auto t = truth.labels();
  const auto& k = kernels::active();
  parallel_chunks(n, kDefaultChunk, [&](std::size_t begin, std::size_t end) {
    for (const auto& a : atlases.atlases) {
      k.accumulate_matches(a.labels.labels().data() + begin, t.data() + begin, counts.data() + begin, end - begin);
    }
    for (std::size_t x = begin; x < end; ++x) {
      if (counts[x] >= n_required) {
        labels[x] = t[x];
      } else {
        unassigned[x] = 1;
      }
    }
  });
  FusionOutput out = make_output(atlases, std::move(labels), std::move(unassigned), std::move(counts));
  return out;
}

LabelVolume combine_with_fallback(const FusionOutput& primary, const LabelVolume& fallback) {
  require_compatible(primary.labels.volume(), fallback.volume(), "fallback");
  const auto p = primary.labels.labels();
  const auto u = primary.unassigned.values();
  const auto f = fallback.labels();
  std::vector<std::uint16_t> out(p.size());
  for (std::size_t x = 0; x < p.size(); ++x) out[x] = u[x] ? f[x] : p[x];
  const auto n = std::max(primary.labels.num_labels(), fallback.num_labels());
  return LabelVolume(Volume(primary.labels.volume().header(), std::move(out)), n);
}

std::optional<FusionMethod> parse_fusion_method(std::string_view name) {
  std::string lower(name);
  std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pv" || lower == "plurality") return FusionMethod::PV;
  if (lower == "mv" || lower == "majority") return FusionMethod::MV;
  if (lower == "trusted") return FusionMethod::TRUSTED;
  if (lower == "oracle") return FusionMethod::ORACLE;
  if (lower == "staple") return FusionMethod::STAPLE;
  return std::nullopt;
}

std::string_view fusion_method_name(FusionMethod method) {
  switch (method) {
    case FusionMethod::PV: return "pv";
    case FusionMethod::MV: return "mv";
    case FusionMethod::TRUSTED: return "trusted";
    case FusionMethod::ORACLE: return "oracle";
    case FusionMethod::STAPLE: return "staple";
  }
  return "unknown";
}

FusionOutput fuse(const AtlasSet& atlases, FusionMethod method, const FusionOptions& options) {
  switch (method) {
    case FusionMethod::PV:
      return plurality_vote(atlases);
    case FusionMethod::MV:
      return majority_vote(atlases);
    case FusionMethod::TRUSTED:
      return trusted_plurality_vote(atlases, options.cut);
    case FusionMethod::ORACLE:
      if (options.truth == nullptr) throw Error(Errc::MissingTruth, "oracle fusion requires a truth volume");
      return oracle_fuse(atlases, *options.truth, options.oracle_n);
    case FusionMethod::STAPLE: {
      const StapleConfig config = options.staple ? *options.staple : StapleConfig{};
      StapleResult s = staple_multilabel(atlases, config);
      FusionOutput out;
      out.labels = std::move(s.labels);
      out.unassigned = TrustMask::filled(atlases.dims(), atlases.spacing(), 0);
      return out;
    }
  }
  throw Error(Errc::UnknownMethod, "unknown fusion method");
}

}  // namespace atlasfuse
