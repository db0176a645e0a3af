#include "stabletree/builder/builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "stabletree/error.hpp"
#include "stabletree/splitstat/candidate_scan.hpp"
#include "stabletree/splitstat/splitstat.hpp"

namespace stabletree::builder {

using core::LabeledBatch;
using core::SplitRule;

void BuildConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in (0, 1]");
  if (n_initial < 10) throw ConfigError("n_initial must be at least 10");
  if (n_initial > n_ps_max) throw ConfigError("n_initial must not exceed n_ps_max");
  if (!(growth_cap > 1.0)) throw ConfigError("growth_cap must exceed 1");
  if (max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (!(purity_epsilon >= 0.0)) throw ConfigError("purity_epsilon must be non-negative");
  if (!(prune_q >= 0.0 && prune_q < 1.0)) throw ConfigError("prune_q must be in [0, 1)");
  if (!inherit_samples && !top_up) throw ConfigError("top_up can only be disabled together with inherit_samples");
  sampler.validate();
}

std::size_t CandidateSet::live_count() const {
  return static_cast<std::size_t>(std::count(live.begin(), live.end(), 1));
}

CandidateSet enumerate_candidates(const sampler::NodeContext& ctx) {
  CandidateSet set;
  std::vector<double> values;
  for (std::size_t c = 0; c < ctx.schema.column_count(); ++c) {
    values.clear();
    for (std::size_t i = 0; i < ctx.anchors.rows; ++i) values.push_back(ctx.anchors(i, c));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const auto& bounds = ctx.region.bounds(c);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      double t = values[i] + (values[i + 1] - values[i]) / 2.0;
      if (!(t < values[i + 1])) t = values[i];
      if (bounds.strictly_inside(t)) set.rules.push_back({c, t});
    }
  }
  set.live.assign(set.rules.size(), 1);
  set.pvalues.assign(set.rules.size(), std::numeric_limits<double>::quiet_NaN());
  return set;
}

SeedPath node_stream(std::uint64_t seed, const std::string& node_path, std::size_t round) {
  return SeedPath(seed).child("build").child(node_path).child(round);
}

double reducible_impurity(const LabeledBatch& pool) {
  if (pool.size() == 0) return 0.0;
  const auto mean = pool.mean_label();
  double within = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (double v : pool.y.row(i)) within += v * v;
  within /= static_cast<double>(pool.size());
  double between = 0.0;
  for (double v : mean) between += v * v;
  return std::max(0.0, within - between);
}

void to_hard_labels(LabeledBatch& pool) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto row = pool.y.row(i);
    const std::size_t top = core::argmax(row);
    std::fill(row.begin(), row.end(), 0.0);
    row[top] = 1.0;
  }
}

std::pair<LabeledBatch, LabeledBatch> partition(const LabeledBatch& pool, const SplitRule& rule) {
  std::pair<LabeledBatch, LabeledBatch> out;
  for (auto* b : {&out.first, &out.second}) {
    b->x = core::Matrix(0, pool.x.cols);
    b->y = core::Matrix(0, pool.y.cols);
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto& side = core::route(rule, pool.x.row(i)) == core::Side::Left ? out.first : out.second;
    side.x.append_row(pool.x.row(i));
    side.y.append_row(pool.y.row(i));
  }
  return out;
}

BuildConfig cart_baseline(BuildConfig cfg) {
  cfg.alpha = 1.0;
  cfg.n_initial = cfg.n_ps_max;
  cfg.inherit_samples = true;
  cfg.top_up = false;
  return cfg;
}

namespace {

LabeledBatch draw(const sampler::NodeContext& ctx, const oracle::Oracle& oracle, const BuildConfig& cfg,
                  std::size_t count, SeedPath stream, const std::string& path, BuildObserver* observer) {
  auto batch = sampler::draw_labeled_batch(ctx, cfg.sampler, count, oracle, stream);
  if (cfg.hard_labels) to_hard_labels(batch);
  if (observer) observer->on_draw(path, ctx.region, batch);
  return batch;
}

}  // namespace

SplitDecision select_split(const sampler::NodeContext& ctx, CandidateSet& candidates,
                           const oracle::Oracle& oracle, const BuildConfig& cfg, SeedPath stream,
                           LabeledBatch& pool, const std::string& node_path, BuildObserver* observer) {
  cfg.validate();
  if (candidates.empty()) throw ContractError("select_split needs at least one candidate");
  if (pool.size() == 0) {
    pool = draw(ctx, oracle, cfg, cfg.n_initial, stream.child(std::uint64_t{0}), node_path, observer);
  }

  SplitDecision decision;
  auto& diag = decision.diagnostics;
  diag.candidates_considered = candidates.size();
  const std::vector<char> all(candidates.size(), 1);

  for (std::size_t round = 1;; ++round) {
    const std::size_t n = pool.size();
    diag.rounds = round;
    diag.pseudo_samples_used = n;

    // Gini for every candidate, so the chosen rule is the minimum over the
    // whole set on the final pool; only live rivals enter the test.
    const auto scan = splitstat::scan_candidates(pool, candidates.rules, all, true);
    if (!scan.best) {
      diag.candidates_surviving = 0;
      decision.rule.reset();
      return decision;
    }
    const std::size_t best = *scan.best;
    candidates.live[best] = 1;
    diag.gini_index = scan.candidates[best].gini_index;

    std::vector<std::size_t> tested;
    std::vector<double> tested_p;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto& eval = scan.candidates[c];
      candidates.pvalues[c] = std::numeric_limits<double>::quiet_NaN();
      if (c == best || !eval.testable() || !candidates.live[c]) continue;
      candidates.pvalues[c] = eval.p_value;
      tested.push_back(c);
      tested_p.push_back(eval.p_value);
    }

    double aggregate = 0.0;
    if (!tested.empty()) {
      // Rivals clearly worse than the best are dropped for good.
      tested_p.push_back(0.0);
      const auto keep = splitstat::prune_candidates(tested_p, tested.size(), cfg.prune_q);
      std::vector<char> survives(tested.size(), 0);
      for (std::size_t idx : keep)
        if (idx < tested.size()) survives[idx] = 1;
      std::vector<double> surviving_p;
      for (std::size_t r = 0; r < tested.size(); ++r) {
        if (survives[r])
          surviving_p.push_back(tested_p[r]);
        else
          candidates.live[tested[r]] = 0;
      }
      aggregate = splitstat::aggregate_pvalue(surviving_p);
    }
    diag.final_aggregate_pvalue = aggregate;
    diag.candidates_surviving = candidates.live_count();
    decision.rule = candidates.rules[best];

    if (!cfg.testing_enabled() || aggregate < cfg.alpha) return decision;
    if (n >= cfg.n_ps_max || round >= cfg.max_rounds) {
      diag.cutoff_reached = true;
      return decision;
    }

    std::size_t target = cfg.n_ps_max;
    if (aggregate < 0.5)
      target = std::min(target, splitstat::required_sample_size(n, aggregate, cfg.alpha));
    target = std::min(target, static_cast<std::size_t>(std::ceil(cfg.growth_cap * static_cast<double>(n))));
    target = std::max(target, n + 1);
    spdlog::debug("node {}: round {} n={} aggregate p={:.4g} live={} -> n={}", node_path.empty() ? "root" : node_path,
                  round, n, aggregate, diag.candidates_surviving, target);
    pool.append(draw(ctx, oracle, cfg, target - n, stream.child(round), node_path, observer));
  }
}

SplitDecision select_split(const sampler::NodeContext& ctx, CandidateSet& candidates,
                           const oracle::Oracle& oracle, const BuildConfig& cfg, SeedPath stream) {
  LabeledBatch pool;
  return select_split(ctx, candidates, oracle, cfg, stream, pool);
}

std::vector<double> global_bandwidths(const core::Dataset& data) {
  std::vector<double> h(data.schema.column_count(), 0.0);
  std::vector<double> column(data.size());
  for (std::size_t c = 0; c < h.size(); ++c) {
    for (std::size_t i = 0; i < data.size(); ++i) column[i] = data.rows(i, c);
    h[c] = sampler::silverman_bandwidth(column);
  }
  return h;
}

namespace {

class TreeGrower {
 public:
  TreeGrower(const core::Dataset& data, const oracle::Oracle& oracle, const BuildConfig& cfg,
             BuildObserver* observer)
      : data_(data), oracle_(oracle), cfg_(cfg), observer_(observer), tree_(data.schema),
        fallback_(global_bandwidths(data)) {}

  core::Tree grow() {
    sampler::NodeContext root{data_.schema, core::Region(data_.schema), data_.rows, fallback_};
    grow_node(std::move(root), 1, "", LabeledBatch{});
    tree_.validate(cfg_.max_depth);
    return std::move(tree_);
  }

 private:
  core::LeafNode make_leaf(const LabeledBatch& pool) const {
    if (cfg_.leaf_mode == LeafMode::HardVote) {
      LabeledBatch votes = pool;
      to_hard_labels(votes);
      return core::Tree::make_leaf(votes.mean_label(), pool.size());
    }
    auto probs = pool.mean_label();
    // Renormalize away accumulated rounding so the leaf is a distribution.
    double sum = 0.0;
    for (double p : probs) sum += p;
    for (double& p : probs) p /= sum;
    return core::Tree::make_leaf(std::move(probs), pool.size());
  }

  core::NodeId grow_node(sampler::NodeContext ctx, std::size_t depth, const std::string& path,
                         LabeledBatch pool) {
    const core::NodeId id = tree_.reserve_node();
    const std::string label = path.empty() ? "root" : "root/" + path;
    try {
      const std::size_t have = pool.size();
      if (have == 0 || (cfg_.top_up && have < cfg_.n_initial)) {
        // Nodes left without inherited samples always get a fresh draw, so
        // every leaf has a pseudo sample to average.
        auto fresh = draw(ctx, oracle_, cfg_, cfg_.n_initial - have, node_stream(cfg_.seed, path, 0), path, observer_);
        if (have == 0)
          pool = std::move(fresh);
        else
          pool.append(fresh);
      }
      if (depth >= cfg_.max_depth || ctx.anchors.rows < cfg_.min_node_anchors || ctx.anchors.rows < 2 ||
          pool.size() < 2 || reducible_impurity(pool) < cfg_.purity_epsilon) {
        tree_.set_node(id, make_leaf(pool));
        return id;
      }
      auto candidates = enumerate_candidates(ctx);
      if (candidates.empty()) {
        tree_.set_node(id, make_leaf(pool));
        return id;
      }
      SeedPath stream = SeedPath(cfg_.seed).child("build").child(path);
      auto decision = select_split(ctx, candidates, oracle_, cfg_, stream, pool, path, observer_);
      if (!decision.rule) {
        tree_.set_node(id, make_leaf(pool));
        return id;
      }
      spdlog::debug("node {}: split {} <= {} after {} samples{}", label,
                    data_.schema.column(decision.rule->column).name, decision.rule->threshold,
                    decision.diagnostics.pseudo_samples_used,
                    decision.diagnostics.cutoff_reached ? " (cutoff)" : "");

      core::InternalNode node{*decision.rule, 0, 0, decision.diagnostics};
      std::pair<LabeledBatch, LabeledBatch> inherited;
      if (cfg_.inherit_samples) inherited = partition(pool, *decision.rule);
      pool = LabeledBatch{};
      node.left = grow_node(child_context(ctx, *decision.rule, core::Side::Left), depth + 1, path + "L",
                            std::move(inherited.first));
      node.right = grow_node(child_context(ctx, *decision.rule, core::Side::Right), depth + 1, path + "R",
                             std::move(inherited.second));
      tree_.set_node(id, node);
      return id;
    } catch (const Error& e) {
      const std::string what = e.what();
      if (what.rfind("at node ", 0) == 0) throw;
      rethrow_with_path(e, "at node " + label + ": " + what);
    }
  }

  sampler::NodeContext child_context(const sampler::NodeContext& parent, const SplitRule& rule,
                                     core::Side side) const {
    sampler::NodeContext child{parent.schema, core::refine(parent.region, rule, side),
                               core::Matrix(0, parent.schema.column_count()), fallback_};
    for (std::size_t i = 0; i < parent.anchors.rows; ++i)
      if (core::route(rule, parent.anchors.row(i)) == side) child.anchors.append_row(parent.anchors.row(i));
    if (child.anchors.rows == 0) {
      // No original rows reached this side: keep the parent's anchors and let
      // rejection sampling enforce the narrower region.
      child.anchors = parent.anchors;
    }
    return child;
  }

  [[noreturn]] static void rethrow_with_path(const Error& e, const std::string& msg) {
    if (dynamic_cast<const SamplerStarvationError*>(&e)) throw SamplerStarvationError(msg);
    if (dynamic_cast<const OracleIoError*>(&e)) throw OracleIoError(msg);
    if (dynamic_cast<const DegenerateSplitError*>(&e)) throw DegenerateSplitError(msg);
    if (dynamic_cast<const SchemaError*>(&e)) throw SchemaError(msg);
    if (dynamic_cast<const DataError*>(&e)) throw DataError(msg);
    if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
    if (dynamic_cast<const ContractError*>(&e)) throw ContractError(msg);
    throw InvariantError(msg);
  }

  const core::Dataset& data_;
  const oracle::Oracle& oracle_;
  const BuildConfig& cfg_;
  BuildObserver* observer_;
  core::Tree tree_;
  std::vector<double> fallback_;
};

}  // namespace

core::Tree build_tree(const core::Dataset& data, const oracle::Oracle& oracle, const BuildConfig& cfg,
                      BuildObserver* observer) {
  cfg.validate();
  if (data.size() == 0) throw DataError("build_tree needs at least one original row");
  if (oracle.feature_count() != data.schema.column_count() || oracle.class_count() != data.schema.class_count())
    throw SchemaError("oracle and data schema are incompatible");
  return TreeGrower(data, oracle, cfg, observer).grow();
}

}  // namespace stabletree::builder
