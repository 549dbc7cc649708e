#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "atlasfuse/fusion.hpp"
#include "atlasfuse/volume.hpp"

namespace atlasfuse {

enum class PriorMode { EMPIRICAL, FIXED };

struct StapleConfig {
  int max_iters = 100;
  double tol = 1e-6;  // on sum_j |dp_j| + |dq_j|
  double init_p = 0.99;
  double init_q = 0.99;
  PriorMode prior_mode = PriorMode::EMPIRICAL;
  double fixed_prior = 0.5;  // used when prior_mode == FIXED

  void validate() const;
};

struct RaterParams {
  double p = 0.0;  // sensitivity
  double q = 0.0;  // specificity
};

struct StapleBinaryResult {
  TrustMap weights;  // posterior foreground probability W(x)
  std::vector<RaterParams> params;
  int iterations = 0;
  bool converged = false;
  double prior = 0.0;
  // Observed-data log-likelihood at the parameters used by each E-step,
  // including the final one.
  std::vector<double> log_likelihood;
};

/// Binary STAPLE EM over rater foreground decisions. Products are accumulated in
/// the log domain; M-step sums use a fixed chunked order, so results do not
/// depend on the worker count.
StapleBinaryResult staple_binary_em(std::span<const TrustMask> decisions, const StapleConfig& config);

struct StructureParams {
  std::uint16_t label = 0;
  std::vector<RaterParams> raters;
  int iterations = 0;
  bool converged = false;
};

struct StapleResult {
  LabelVolume labels;
  std::vector<StructureParams> structures;
  std::optional<Volume> posterior;  // F32, winning posterior per voxel
};

/// Runs binary EM per structure 1..N on indicator masks and takes the posterior
/// argmax (ties to the smallest label); voxels whose best posterior is < 0.5
/// become background.
StapleResult staple_multilabel(const AtlasSet& atlases, const StapleConfig& config = {});

}  // namespace atlasfuse
