#pragma once

#include <cstdint>
#include <vector>

#include "stabletree/core/region.hpp"
#include "stabletree/core/schema.hpp"
#include "stabletree/oracle/oracle.hpp"
#include "stabletree/random.hpp"

namespace stabletree::sampler {

struct SamplerConfig {
  /// Multiplier on the per-column Silverman bandwidth.
  double bandwidth_factor = 1.0;
  /// Probability that an ordinal value moves to a neighbouring level.
  double ordinal_jump_prob = 0.1;
  std::size_t max_rejection_factor = 100;
  std::size_t threads = 1;

  void validate() const;
};

/// Where pseudo covariates for one tree node come from.
struct NodeContext {
  core::Schema schema;
  core::Region region;
  /// Original rows routed into the node; kernel centres.
  core::Matrix anchors;
  /// Per-column bandwidth used when the anchors give a zero Silverman
  /// bandwidth (e.g. a single anchor). Empty means zero.
  std::vector<double> fallback_bandwidth;

  /// Throws ContractError when anchors are empty or fall outside the region.
  void validate() const;
};

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to the non-zero one of
/// the two spreads; 0 when the values are constant.
double silverman_bandwidth(std::vector<double> values);

/// Per-column kernel widths for ctx (continuous columns only; 0 for ordinal).
std::vector<double> node_bandwidths(const NodeContext& ctx, const SamplerConfig& cfg);

/// Pseudo covariates from the smoothed node-conditional empirical
/// distribution, accepted only inside ctx.region. Draws are generated in fixed
/// blocks with their own substreams, so output depends only on (stream, count).
/// Throws SamplerStarvationError when a block needs more than
/// max_rejection_factor rejections per requested row.
core::Matrix draw_covariates(const NodeContext& ctx, const SamplerConfig& cfg, std::size_t count,
                             SeedPath stream);

core::LabeledBatch draw_labeled_batch(const NodeContext& ctx, const SamplerConfig& cfg,
                                      std::size_t count, const oracle::Oracle& oracle,
                                      SeedPath stream);

std::vector<core::SoftLabeledSample> draw_labeled(const NodeContext& ctx, const SamplerConfig& cfg,
                                                  std::size_t count, const oracle::Oracle& oracle,
                                                  SeedPath stream);

}  // namespace stabletree::sampler
