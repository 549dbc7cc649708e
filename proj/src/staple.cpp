#include "atlasfuse/staple.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atlasfuse/kernels.hpp"
#include "atlasfuse/parallel.hpp"

namespace atlasfuse {

void StapleConfig::validate() const {
  if (!(init_p > 0.0 && init_p < 1.0) || !(init_q > 0.0 && init_q < 1.0)) {
    throw Error(Errc::InvalidArgument, "init_p and init_q must lie in (0,1)");
  }
  if (!(tol > 0.0)) throw Error(Errc::InvalidArgument, "tol must be positive");
  if (max_iters < 1) throw Error(Errc::InvalidArgument, "max_iters must be >= 1");
  if (prior_mode == PriorMode::FIXED && !(fixed_prior > 0.0 && fixed_prior < 1.0)) {
    throw Error(Errc::InvalidArgument, "fixed prior must lie in (0,1)");
  }
}

namespace {

// Keeps log(p), log(1-p) finite; the clamped M-step still maximizes the
// expected complete-data likelihood over the clamped box.
constexpr double kParamFloor = 1e-12;

double clamp_param(double v) { return std::clamp(v, kParamFloor, 1.0 - kParamFloor); }

struct Neumaier {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct EmState {
  std::size_t n_voxels;
  std::span<const TrustMask> decisions;
  double log_prior, log_1m_prior;
  std::vector<double> log_a, log_b, weights;
};

std::size_t num_chunks(std::size_t n) { return (n + kDefaultChunk - 1) / kDefaultChunk; }

// E-step; returns the observed-data log-likelihood.
double e_step(EmState& s, const std::vector<RaterParams>& params) {
  const auto& k = kernels::active();
  std::vector<Neumaier> partial(num_chunks(s.n_voxels));
  parallel_chunks(s.n_voxels, kDefaultChunk, [&](std::size_t begin, std::size_t end) {
    const std::size_t len = end - begin;
    std::fill_n(s.log_a.begin() + static_cast<std::ptrdiff_t>(begin), len, s.log_prior);
    std::fill_n(s.log_b.begin() + static_cast<std::ptrdiff_t>(begin), len, s.log_1m_prior);
    for (std::size_t j = 0; j < params.size(); ++j) {
      const double p = params[j].p, q = params[j].q;
      k.accumulate_rater_log_terms(s.decisions[j].values().data() + begin, std::log(p), std::log1p(-p), std::log(q),
                                   std::log1p(-q), s.log_a.data() + begin, s.log_b.data() + begin, len);
    }
    Neumaier ll;
    for (std::size_t x = begin; x < end; ++x) {
      const double a = s.log_a[x], b = s.log_b[x];
      const double hi = std::max(a, b);
      const double lse = hi + std::log1p(std::exp(std::min(a, b) - hi));
      s.weights[x] = std::exp(a - lse);
      ll.add(lse);
    }
    partial[begin / kDefaultChunk] = ll;
  });
  Neumaier total;
  for (const auto& c : partial) {
    total.add(c.sum);
    total.add(c.comp);
  }
  return total.value();
}

std::vector<RaterParams> m_step(const EmState& s, const std::vector<RaterParams>& previous) {
  const std::size_t raters = previous.size();
  const std::size_t chunks = num_chunks(s.n_voxels);
  // Per chunk: sum W, sum (1-W), then per rater sum W*D and sum (1-W)(1-D).
  const std::size_t stride = 2 + 2 * raters;
  std::vector<double> partial(chunks * stride, 0.0);
  parallel_chunks(s.n_voxels, kDefaultChunk, [&](std::size_t begin, std::size_t end) {
    double* out = partial.data() + (begin / kDefaultChunk) * stride;
    for (std::size_t x = begin; x < end; ++x) {
      out[0] += s.weights[x];
      out[1] += 1.0 - s.weights[x];
    }
    for (std::size_t j = 0; j < raters; ++j) {
      const auto d = s.decisions[j].values();
      double wd = 0.0, nn = 0.0;
      for (std::size_t x = begin; x < end; ++x) {
        if (d[x]) {
          wd += s.weights[x];
        } else {
          nn += 1.0 - s.weights[x];
        }
      }
      out[2 + 2 * j] = wd;
      out[3 + 2 * j] = nn;
    }
  });
  std::vector<double> total(stride, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t i = 0; i < stride; ++i) total[i] += partial[c * stride + i];
  }
  std::vector<RaterParams> next(raters);
  for (std::size_t j = 0; j < raters; ++j) {
    next[j].p = total[0] > 0.0 ? clamp_param(total[2 + 2 * j] / total[0]) : previous[j].p;
    next[j].q = total[1] > 0.0 ? clamp_param(total[3 + 2 * j] / total[1]) : previous[j].q;
  }
  return next;
}

}  // namespace

StapleBinaryResult staple_binary_em(std::span<const TrustMask> decisions, const StapleConfig& config) {
  config.validate();
  if (decisions.empty()) throw Error(Errc::InvalidArgument, "STAPLE needs at least one rater");
  for (std::size_t j = 1; j < decisions.size(); ++j) {
    require_compatible(decisions[0].volume(), decisions[j].volume(), "STAPLE rater");
  }
  const std::size_t n = decisions[0].size();
  const Dims dims = decisions[0].dims();
  const Spacing spacing = decisions[0].volume().spacing();

  std::size_t ones = 0;
  for (const auto& d : decisions) ones += d.count_ones();
  const std::size_t cells = n * decisions.size();

  StapleBinaryResult result;
  if (ones == 0 || ones == cells) {
    // Every rater agrees on an all-empty or all-full segmentation.
    Volume w = Volume::zeros(dims, spacing, DType::F32);
    std::ranges::fill(w.data<float>(), ones == 0 ? 0.0f : 1.0f);
    result.weights = TrustMap(std::move(w));
    result.params.assign(decisions.size(), RaterParams{1.0, 1.0});
    result.converged = true;
    result.prior = ones == 0 ? 0.0 : 1.0;
    return result;
  }

  double prior = config.prior_mode == PriorMode::FIXED
                     ? config.fixed_prior
                     : static_cast<double>(ones) / static_cast<double>(cells);
  prior = clamp_param(prior);
  result.prior = prior;

  EmState s{n, decisions, std::log(prior), std::log1p(-prior), std::vector<double>(n), std::vector<double>(n),
            std::vector<double>(n)};
  std::vector<RaterParams> params(decisions.size(), RaterParams{config.init_p, config.init_q});

  int it = 0;
  bool converged = false;
  while (it < config.max_iters) {
    ++it;
    result.log_likelihood.push_back(e_step(s, params));
    auto next = m_step(s, params);
    double delta = 0.0;
    for (std::size_t j = 0; j < params.size(); ++j) {
      delta += std::abs(next[j].p - params[j].p) + std::abs(next[j].q - params[j].q);
    }
    params = std::move(next);
    if (delta < config.tol) {
      converged = true;
      break;
    }
  }
  result.log_likelihood.push_back(e_step(s, params));

  Volume w = Volume::zeros(dims, spacing, DType::F32);
  auto wv = w.data<float>();
  for (std::size_t x = 0; x < n; ++x) wv[x] = static_cast<float>(s.weights[x]);
  result.weights = TrustMap(std::move(w));
  result.params = std::move(params);
  result.iterations = it;
  result.converged = converged;
  return result;
}

StapleResult staple_multilabel(const AtlasSet& atlases, const StapleConfig& config) {
  atlases.validate();
  config.validate();
  if (atlases.num_labels < 1) throw Error(Errc::InvalidArgument, "STAPLE needs num_labels >= 1");
  const Dims dims = atlases.dims();
  const Spacing spacing = atlases.spacing();
  const std::size_t n = dims.count();
  const auto& k = kernels::active();

  std::vector<float> best_w(n, -1.0f);
  std::vector<std::uint16_t> best_label(n, 0);
  StapleResult result;

  std::vector<TrustMask> indicators;
  indicators.reserve(atlases.size());
  for (std::size_t i = 0; i < atlases.size(); ++i) indicators.push_back(TrustMask::filled(dims, spacing, 0));

  for (std::uint32_t l = 1; l <= atlases.num_labels; ++l) {
    const auto label = static_cast<std::uint16_t>(l);
    for (std::size_t i = 0; i < atlases.size(); ++i) {
      k.label_indicator(atlases.atlases[i].labels.labels().data(), label, indicators[i].values().data(), n);
    }
    StapleBinaryResult r = staple_binary_em(indicators, config);
    const auto w = r.weights.values();
    for (std::size_t x = 0; x < n; ++x) {
      if (w[x] > best_w[x]) {
        best_w[x] = w[x];
        best_label[x] = label;
      }
    }
    result.structures.push_back({label, std::move(r.params), r.iterations, r.converged});
  }

  std::vector<std::uint16_t> labels(n, 0);
  for (std::size_t x = 0; x < n; ++x) labels[x] = best_w[x] >= 0.5f ? best_label[x] : 0;
  result.labels = LabelVolume(Volume({dims, spacing, DType::U16}, std::move(labels)), atlases.num_labels);
  for (auto& v : best_w) v = std::max(v, 0.0f);
  result.posterior = Volume({dims, spacing, DType::F32}, std::move(best_w));
  return result;
}

}  // namespace atlasfuse
