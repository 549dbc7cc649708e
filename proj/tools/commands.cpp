#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "atlasfuse/fusion.hpp"
#include "atlasfuse/manifest.hpp"
#include "atlasfuse/staple.hpp"
#include "atlasfuse/synth.hpp"
#include "atlasfuse/trust.hpp"

namespace atlasfuse::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoFailure:
    case Errc::BadMagic:
    case Errc::TruncatedPayload:
    case Errc::BadDtype:
    case Errc::NonFiniteData:
    case Errc::BadManifest:
      return kIo;
    default:
      return kValidation;
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_to_json(const MetricSummary& s) {
  return {{"volume_dice", optional_number(s.volume_dice)},
          {"avg_surface_dist_mm", optional_number(s.avg_surface_dist_mm)},
          {"surface_dice", optional_number(s.surface_dice)},
          {"hausdorff_mm", optional_number(s.hausdorff_mm)},
          {"dist95_mm", optional_number(s.dist95_mm)}};
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::BadManifest, path.string() + ": malformed JSON: " + e.what());
  }
}

Dims parse_dims(const std::string& text) {
  std::vector<std::uint64_t> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      parts.push_back(static_cast<std::uint64_t>(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--size", "expected positive integers x,y,z");
    }
  }
  if (parts.size() == 1) return {parts[0], parts[0], parts[0]};
  if (parts.size() != 3) throw CLI::ValidationError("--size", "expected x,y,z");
  return {parts[0], parts[1], parts[2]};
}

std::string atlas_stem(std::size_t i) { return "atlas" + std::to_string(i + 1); }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::string size = "48,48,48";
  std::size_t num_atlases = 8;
  std::uint16_t num_structures = 4;
  std::uint64_t seed = 7;
  double amplitude = 3.0;
  double smoothness = 4.0;
  double noise = 0.05;
  bool dump_fields = false;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.dims = parse_dims(a.size);
  cfg.num_atlases = a.num_atlases;
  cfg.num_structures = a.num_structures;
  cfg.seed = a.seed;
  cfg.warp_amplitude = a.amplitude;
  cfg.warp_smoothness = a.smoothness;
  cfg.noise_std = a.noise;
  const auto ds = simulate_atlas_set(cfg);
  write_dataset(ds, a.out_dir);
  if (a.dump_fields) {
    for (std::size_t i = 0; i < cfg.num_atlases; ++i) {
      const auto f = random_displacement_field(cfg.dims, cfg.warp_amplitude, cfg.warp_smoothness,
                                               derive_seed(cfg.seed, 1000 + i), cfg.spacing);
      const fs::path dir(a.out_dir);
      write_volume(f.ux, dir / (atlas_stem(i) + ".ux.mav"));
      write_volume(f.uy, dir / (atlas_stem(i) + ".uy.mav"));
      write_volume(f.uz, dir / (atlas_stem(i) + ".uz.mav"));
    }
  }
  std::cout << "wrote " << (2 + 2 * cfg.num_atlases) << " volumes and manifest.json to " << a.out_dir << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct FuseArgs {
  std::string manifest;
  std::string method;
  std::string out;
  std::string unassigned_out;
  std::string votes_out;
  std::string truth;
  std::string fallback;
  std::string report;
  std::size_t oracle_n = 1;
  float cut = 0.5f;
  int staple_max_iters = 100;
  double staple_tol = 1e-6;
};

int cmd_fuse(const FuseArgs& a) {
  const auto method = parse_fusion_method(a.method);
  if (!method) {
    std::cerr << "unknown method '" << a.method << "' (pv, mv, trusted, oracle, staple)\n";
    return kUsage;
  }
  if (*method == FusionMethod::ORACLE && a.truth.empty()) {
    std::cerr << "--method oracle requires --truth\n";
    return kUsage;
  }
  const Manifest m = load_manifest(a.manifest);
  const AtlasSet set = load_atlas_set(m, false);
  std::optional<LabelVolume> truth;
  if (!a.truth.empty()) truth = load_labels(a.truth, m.num_labels);

  StapleConfig staple;
  staple.max_iters = a.staple_max_iters;
  staple.tol = a.staple_tol;
  FusionOptions opts;
  opts.truth = truth ? &*truth : nullptr;
  opts.oracle_n = a.oracle_n;
  opts.cut = a.cut;
  opts.staple = &staple;

  json info{{"method", std::string(fusion_method_name(*method))}, {"num_atlases", set.size()}};
  FusionOutput result;
  if (*method == FusionMethod::STAPLE) {
    StapleResult s = staple_multilabel(set, staple);
    json per;
    for (const auto& st : s.structures) {
      json p = json::array(), q = json::array();
      for (const auto& r : st.raters) {
        p.push_back(r.p);
        q.push_back(r.q);
      }
      per[std::to_string(st.label)] = {{"p", p}, {"q", q}, {"iterations", st.iterations}, {"converged", st.converged}};
    }
    info["staple"] = per;
    result.labels = std::move(s.labels);
    result.unassigned = TrustMask::filled(set.dims(), set.spacing(), 0);
  } else {
    result = fuse(set, *method, opts);
  }
  info["unassigned_voxels"] = result.unassigned.count_ones();
  info["unassigned_fraction"] = result.unassigned_fraction();

  LabelVolume final_labels = result.labels;
  if (!a.fallback.empty()) {
    final_labels = combine_with_fallback(result, load_labels(a.fallback, m.num_labels));
    info["fallback"] = true;
  }
  write_volume(final_labels.volume(), a.out);
  if (!a.unassigned_out.empty()) write_volume(result.unassigned.volume(), a.unassigned_out);
  if (!a.votes_out.empty() && result.vote_counts) write_volume(*result.vote_counts, a.votes_out);
  if (!a.report.empty()) write_json(info, a.report);
  std::cout << fusion_method_name(*method) << ": unassigned fraction " << result.unassigned_fraction() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct MasksArgs {
  std::string manifest;
  std::string manifest_out;
  std::string out_dir;
  // heuristic
  std::string similarity = "mad";
  int radius = 2;
  std::optional<double> threshold;
  // threshold
  float cut = 0.5f;
};

fs::path masks_dir(const MasksArgs& a, const Manifest& m) {
  fs::path dir = a.out_dir.empty() ? m.base_dir : fs::path(a.out_dir);
  if (dir.empty()) dir = ".";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());
  return dir;
}

// Paths stored in the manifest are kept relative to its directory when possible.
std::string manifest_path(const Manifest& m, const fs::path& file) {
  const fs::path base = m.base_dir.empty() ? fs::path(".") : m.base_dir;
  std::error_code ec;
  const fs::path rel = fs::relative(file, base, ec);
  if (!ec && !rel.empty()) return rel.generic_string();
  return fs::absolute(file).generic_string();
}

// Saves the manifest, rewriting paths so they still resolve from the output location.
void finish_masks(const MasksArgs& a, Manifest m) {
  const fs::path out = a.manifest_out.empty() ? fs::path(a.manifest) : fs::path(a.manifest_out);
  Manifest rebased = m;
  rebased.base_dir = out.parent_path();
  auto rebase = [&](std::optional<std::string>& p) {
    if (p) p = manifest_path(rebased, m.resolve(*p));
  };
  rebase(rebased.target_image);
  rebase(rebased.target_labels);
  for (auto& at : rebased.atlases) {
    std::optional<std::string> labels = at.labels;
    rebase(labels);
    at.labels = *labels;
    rebase(at.image);
    rebase(at.mask);
    rebase(at.trust_map);
  }
  save_manifest(rebased, out);
}

int cmd_masks_gen_gt(const MasksArgs& a) {
  Manifest m = load_manifest(a.manifest);
  if (!m.target_labels) {
    std::cerr << "manifest has no target_labels; ground-truth masks need them\n";
    return kValidation;
  }
  const LabelVolume truth = load_labels(m.resolve(*m.target_labels), m.num_labels);
  const fs::path dir = masks_dir(a, m);
  for (std::size_t i = 0; i < m.atlases.size(); ++i) {
    const LabelVolume lab = load_labels(m.resolve(m.atlases[i].labels), m.num_labels);
    const TrustMask mask = gen_agreement_mask(lab, truth);
    const fs::path file = dir / (atlas_stem(i) + ".gtmask.mav");
    write_volume(mask.volume(), file);
    m.atlases[i].mask = manifest_path(m, file);
  }
  finish_masks(a, m);
  std::cout << "wrote " << m.atlases.size() << " agreement masks\n";
  return kOk;
}

int cmd_masks_heuristic(const MasksArgs& a) {
  Manifest m = load_manifest(a.manifest);
  if (!m.target_image) {
    std::cerr << "manifest has no target_image\n";
    return kValidation;
  }
  HeuristicConfig cfg;
  if (a.similarity == "ncc") {
    cfg = HeuristicConfig::ncc();
  } else if (a.similarity == "mad") {
    cfg = HeuristicConfig::mad();
  } else {
    std::cerr << "unknown similarity '" << a.similarity << "' (ncc, mad)\n";
    return kUsage;
  }
  cfg.window_radius = a.radius;
  if (a.threshold) cfg.threshold = *a.threshold;
  const Volume target = read_volume(m.resolve(*m.target_image));
  const fs::path dir = masks_dir(a, m);
  for (std::size_t i = 0; i < m.atlases.size(); ++i) {
    if (!m.atlases[i].image) {
      std::cerr << "atlas " << i + 1 << " has no image\n";
      return kValidation;
    }
    const Volume img = read_volume(m.resolve(*m.atlases[i].image));
    const TrustMap map = heuristic_trust_predict(target, img, cfg);
    const TrustMask mask = threshold_trust_map(map, cfg.mask_cut());
    const fs::path map_file = dir / (atlas_stem(i) + ".trust.mav");
    const fs::path mask_file = dir / (atlas_stem(i) + ".mask.mav");
    write_volume(map.volume(), map_file);
    write_volume(mask.volume(), mask_file);
    m.atlases[i].trust_map = manifest_path(m, map_file);
    m.atlases[i].mask = manifest_path(m, mask_file);
  }
  finish_masks(a, m);
  std::cout << "wrote " << m.atlases.size() << " heuristic trust maps and masks\n";
  return kOk;
}

int cmd_masks_threshold(const MasksArgs& a) {
  Manifest m = load_manifest(a.manifest);
  const fs::path dir = masks_dir(a, m);
  for (std::size_t i = 0; i < m.atlases.size(); ++i) {
    if (!m.atlases[i].trust_map) {
      std::cerr << "atlas " << i + 1 << " has no trust_map\n";
      return kValidation;
    }
    const TrustMap map(read_volume(m.resolve(*m.atlases[i].trust_map)));
    const TrustMask mask = threshold_trust_map(map, a.cut);
    const fs::path file = dir / (atlas_stem(i) + ".mask.mav");
    write_volume(mask.volume(), file);
    m.atlases[i].mask = manifest_path(m, file);
  }
  finish_masks(a, m);
  std::cout << "thresholded " << m.atlases.size() << " trust maps at " << a.cut << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, truth, report, fusion_report;
  std::uint16_t num_labels = 0;
  double tolerance_mm = 1.0;
};

int cmd_eval(const EvalArgs& a) {
  const LabelVolume pred = load_labels(a.pred, a.num_labels);
  const LabelVolume truth = load_labels(a.truth, a.num_labels);
  const MetricsReport report = evaluate_all(pred, truth, a.tolerance_mm);
  json j = report_to_json(report);
  if (!a.fusion_report.empty()) j["fusion"] = read_json(a.fusion_report);
  write_json(j, a.report);
  if (report.aggregate.volume_dice) std::cout << "aggregate volume dice " << *report.aggregate.volume_dice << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::vector<std::string> methods;  // name=report1,report2,...
  std::string baseline;
  std::string metric = "volume_dice";
  std::string out;
  bool per_structure = false;
  double alpha = 0.05;
  double fdr = 0.05;
};

std::vector<double> scores_from_report(const json& j, const std::string& metric, bool per_structure,
                                       const std::string& file) {
  std::vector<double> out;
  try {
    if (per_structure) {
      for (const auto& [label, entry] : j.at("structures").items()) {
        const auto& v = entry.at(metric);
        if (!v.is_null()) out.push_back(v.get<double>());
      }
    } else {
      const auto& v = j.at("aggregate").at(metric);
      if (!v.is_null()) out.push_back(v.get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(Errc::BadManifest, file + ": not an evaluation report: " + e.what());
  }
  return out;
}

int cmd_stats(const StatsArgs& a) {
  std::map<std::string, std::vector<double>> scores;
  for (const auto& method_arg : a.methods) {
    const auto eq = method_arg.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "--method expects name=report1,report2,...\n";
      return kUsage;
    }
    const std::string name = method_arg.substr(0, eq);
    std::stringstream files(method_arg.substr(eq + 1));
    std::string file;
    auto& list = scores[name];
    while (std::getline(files, file, ',')) {
      if (file.empty()) continue;
      const auto values = scores_from_report(read_json(file), a.metric, a.per_structure, file);
      list.insert(list.end(), values.begin(), values.end());
    }
    if (list.empty()) {
      std::cerr << "method '" << name << "' has no scores for metric " << a.metric << '\n';
      return kValidation;
    }
  }
  if (scores.size() < 2) {
    std::cerr << "need at least two methods\n";
    return kUsage;
  }
  if (!scores.contains(a.baseline)) {
    std::cerr << "baseline '" << a.baseline << "' is not among the methods\n";
    return kUsage;
  }
  const auto result = compare_methods(scores, a.baseline, a.alpha, a.fdr);
  json j = comparison_to_json(result);
  j["metric"] = a.metric;
  // Mean and population std of each method's samples (subjects or structures).
  json summary = json::object();
  for (const auto& [name, values] : scores) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    summary[name] = {{"n", values.size()}, {"mean", mean}, {"std", std::sqrt(var / static_cast<double>(values.size()))}};
  }
  j["summary"] = summary;
  write_json(j, a.out);
  for (const auto& [name, r] : result.results) {
    std::cout << name << ": U=" << r.u << " p=" << r.p << (r.significant ? " significant" : "") << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TilesArgs {
  std::string size;
  int patch = 72;
  int core = 40;
};

int cmd_tiles(const TilesArgs& a) {
  std::cout << tile_patches(parse_dims(a.size), a.patch, a.core).to_text();
  return kOk;
}

}  // namespace

json report_to_json(const MetricsReport& r) {
  json structures = json::object();
  for (const auto& [label, s] : r.structures) {
    structures[std::to_string(label)] = {{"volume_dice", s.volume_dice},
                                         {"avg_surface_dist_mm", optional_number(s.avg_surface_dist_mm)},
                                         {"surface_dice", optional_number(s.surface_dice)},
                                         {"hausdorff_mm", optional_number(s.hausdorff_mm)},
                                         {"dist95_mm", optional_number(s.dist95_mm)}};
  }
  return {{"tolerance_mm", r.tolerance_mm},
          {"structures", structures},
          {"aggregate", summary_to_json(r.aggregate)},
          {"aggregate_std", summary_to_json(r.aggregate_std)},
          {"excluded", r.excluded}};
}

json comparison_to_json(const ComparisonResult& c) {
  json results = json::object();
  for (const auto& [name, r] : c.results) results[name] = {{"u", r.u}, {"p", r.p}, {"significant", r.significant}};
  return {{"baseline", c.baseline}, {"fdr", c.fdr}, {"alpha", c.alpha}, {"results", results}};
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"multi-atlas label fusion toolkit", "atlasfuse"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic atlas dataset");
  s->add_option("--out-dir", synth.out_dir, "output directory")->required();
  s->add_option("--size", synth.size, "volume size x,y,z");
  s->add_option("--num-atlases", synth.num_atlases)->check(CLI::PositiveNumber);
  s->add_option("--num-structures", synth.num_structures)->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed);
  s->add_option("--warp-amplitude", synth.amplitude)->check(CLI::NonNegativeNumber);
  s->add_option("--warp-smoothness", synth.smoothness)->check(CLI::PositiveNumber);
  s->add_option("--noise", synth.noise)->check(CLI::NonNegativeNumber);
  s->add_flag("--dump-fields", synth.dump_fields, "also write per-atlas displacement components");

  FuseArgs fuse_args;
  auto* f = app.add_subcommand("fuse", "fuse warped atlas labels");
  f->add_option("--manifest", fuse_args.manifest)->required();
  f->add_option("--method", fuse_args.method, "pv | mv | trusted | oracle | staple")->required();
  f->add_option("--out", fuse_args.out, "fused label volume")->required();
  f->add_option("--unassigned-out", fuse_args.unassigned_out);
  f->add_option("--votes-out", fuse_args.votes_out);
  f->add_option("--truth", fuse_args.truth, "truth labels (oracle)");
  f->add_option("--oracle-n", fuse_args.oracle_n)->check(CLI::PositiveNumber);
  f->add_option("--fallback", fuse_args.fallback, "labels used where no vote was cast");
  f->add_option("--cut", fuse_args.cut, "trust-map threshold for trusted voting");
  f->add_option("--report", fuse_args.report, "fusion summary JSON");
  f->add_option("--staple-max-iters", fuse_args.staple_max_iters)->check(CLI::PositiveNumber);
  f->add_option("--staple-tol", fuse_args.staple_tol)->check(CLI::PositiveNumber);

  MasksArgs masks;
  auto* mk = app.add_subcommand("masks", "generate per-atlas trust masks");
  mk->require_subcommand(1);
  mk->add_option("--manifest", masks.manifest)->required();
  mk->add_option("--manifest-out", masks.manifest_out, "write the updated manifest here instead of in place");
  mk->add_option("--out-dir", masks.out_dir, "where to write masks (default: manifest directory)");
  auto* gen_gt = mk->add_subcommand("gen-gt", "agreement masks against target labels");
  auto* heur = mk->add_subcommand("heuristic", "local-similarity trust maps and masks");
  heur->add_option("--similarity", masks.similarity, "mad | ncc");
  heur->add_option("--radius", masks.radius)->check(CLI::PositiveNumber);
  heur->add_option("--threshold", masks.threshold);
  auto* thr = mk->add_subcommand("threshold", "threshold existing trust maps");
  thr->add_option("--cut", masks.cut);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate a segmentation against the truth");
  e->add_option("--pred", eval.pred)->required();
  e->add_option("--truth", eval.truth)->required();
  e->add_option("--num-labels", eval.num_labels)->required();
  e->add_option("--report", eval.report)->required();
  e->add_option("--tolerance-mm", eval.tolerance_mm)->check(CLI::NonNegativeNumber);
  e->add_option("--fusion-report", eval.fusion_report, "embed a fuse --report JSON");

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Mann-Whitney U + Benjamini-Hochberg across methods");
  st->add_option("--method", stats.methods, "name=report1,report2,... (repeat per method)")->required();
  st->add_option("--baseline", stats.baseline)->required();
  st->add_option("--metric", stats.metric);
  st->add_flag("--per-structure", stats.per_structure, "use per-structure values instead of aggregates");
  st->add_option("--alpha", stats.alpha);
  st->add_option("--fdr", stats.fdr);
  st->add_option("--out", stats.out)->required();

  TilesArgs tiles;
  auto* t = app.add_subcommand("tiles", "print the patch tiling for a volume size");
  t->add_option("--size", tiles.size)->required();
  t->add_option("--patch", tiles.patch);
  t->add_option("--core", tiles.core);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (f->parsed()) return cmd_fuse(fuse_args);
    if (gen_gt->parsed()) return cmd_masks_gen_gt(masks);
    if (heur->parsed()) return cmd_masks_heuristic(masks);
    if (thr->parsed()) return cmd_masks_threshold(masks);
    if (e->parsed()) return cmd_eval(eval);
    if (st->parsed()) return cmd_stats(stats);
    if (t->parsed()) return cmd_tiles(tiles);
  } catch (const CLI::ValidationError& err) {
    std::cerr << err.what() << '\n';
    return kUsage;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace atlasfuse::cli
