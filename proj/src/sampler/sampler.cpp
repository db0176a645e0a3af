#include "stabletree/sampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stabletree/error.hpp"
#include "stabletree/parallel.hpp"

namespace stabletree::sampler {

namespace {
constexpr std::size_t kBlock = 256;
}

void SamplerConfig::validate() const {
  if (!(bandwidth_factor >= 0.0)) throw ConfigError("bandwidth_factor must be non-negative");
  if (!(ordinal_jump_prob >= 0.0 && ordinal_jump_prob <= 0.5))
    throw ConfigError("ordinal_jump_prob must be in [0, 0.5]");
  if (max_rejection_factor < 1) throw ConfigError("max_rejection_factor must be at least 1");
}

void NodeContext::validate() const {
  if (anchors.rows == 0) throw ContractError("node context has no anchors");
  if (anchors.cols != schema.column_count() || region.column_count() != schema.column_count())
    throw ContractError("node context shapes disagree with the schema");
  for (std::size_t i = 0; i < anchors.rows; ++i)
    if (!region.contains(anchors.row(i)))
      throw ContractError("anchor " + std::to_string(i) + " lies outside the node region");
}

double silverman_bandwidth(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (spread <= 0.0) spread = std::max(sd, iqr);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> node_bandwidths(const NodeContext& ctx, const SamplerConfig& cfg) {
  std::vector<double> h(ctx.schema.column_count(), 0.0);
  std::vector<double> column(ctx.anchors.rows);
  for (std::size_t c = 0; c < h.size(); ++c) {
    if (ctx.schema.column(c).is_ordinal()) continue;
    for (std::size_t i = 0; i < ctx.anchors.rows; ++i) column[i] = ctx.anchors(i, c);
    double bw = silverman_bandwidth(column);
    if (bw <= 0.0 && c < ctx.fallback_bandwidth.size()) bw = ctx.fallback_bandwidth[c];
    h[c] = cfg.bandwidth_factor * bw;
  }
  return h;
}

core::Matrix draw_covariates(const NodeContext& ctx, const SamplerConfig& cfg, std::size_t count,
                             SeedPath stream) {
  cfg.validate();
  ctx.validate();
  const std::size_t m = ctx.schema.column_count();
  core::Matrix out(count, m);
  if (count == 0) return out;
  const auto bandwidth = node_bandwidths(ctx, cfg);
  std::vector<int> max_level(m, -1);
  for (std::size_t c = 0; c < m; ++c)
    if (ctx.schema.column(c).is_ordinal()) max_level[c] = ctx.schema.column(c).level_count - 1;

  const std::size_t blocks = (count + kBlock - 1) / kBlock;
  parallel_for(blocks, cfg.threads, [&](std::size_t b) {
    auto rng = stream.child(b).engine();
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t lo = b * kBlock, hi = std::min(count, lo + kBlock);
    const std::size_t budget = cfg.max_rejection_factor * (hi - lo);
    std::size_t rejected = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      auto row = out.row(i);
      for (;;) {
        const auto anchor = ctx.anchors.row(uniform_index(rng, ctx.anchors.rows));
        for (std::size_t c = 0; c < m; ++c) {
          double v = anchor[c];
          if (max_level[c] >= 0) {
            if (cfg.ordinal_jump_prob > 0.0 && uniform01(rng) < cfg.ordinal_jump_prob) {
              v += uniform01(rng) < 0.5 ? -1.0 : 1.0;
              v = std::clamp(v, 0.0, static_cast<double>(max_level[c]));
            }
          } else if (bandwidth[c] > 0.0) {
            v += bandwidth[c] * gauss(rng);
          }
          row[c] = v;
        }
        if (ctx.region.contains(row)) break;
        if (++rejected > budget)
          throw SamplerStarvationError("sampler starved in region " + ctx.region.describe(ctx.schema) +
                                       ": more than " + std::to_string(budget) + " rejections for " +
                                       std::to_string(hi - lo) + " draws");
      }
    }
  });
  return out;
}

core::LabeledBatch draw_labeled_batch(const NodeContext& ctx, const SamplerConfig& cfg,
                                      std::size_t count, const oracle::Oracle& oracle,
                                      SeedPath stream) {
  if (oracle.feature_count() != ctx.schema.column_count() ||
      oracle.class_count() != ctx.schema.class_count())
    throw SchemaError("oracle shape (" + std::to_string(oracle.feature_count()) + " features, " +
                      std::to_string(oracle.class_count()) + " classes) does not match the schema");
  core::LabeledBatch batch;
  if (count == 0) {
    batch.x = core::Matrix(0, ctx.schema.column_count());
    batch.y = core::Matrix(0, ctx.schema.class_count());
    return batch;
  }
  batch.x = draw_covariates(ctx, cfg, count, stream);
  batch.y = oracle.predict_proba(batch.x);
  oracle::check_probabilities(batch.y, count, ctx.schema.class_count());
  return batch;
}

std::vector<core::SoftLabeledSample> draw_labeled(const NodeContext& ctx, const SamplerConfig& cfg,
                                                  std::size_t count, const oracle::Oracle& oracle,
                                                  SeedPath stream) {
  return draw_labeled_batch(ctx, cfg, count, oracle, stream).to_samples();
}

}  // namespace stabletree::sampler
