#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stabletree/core/region.hpp"
#include "stabletree/core/schema.hpp"
#include "stabletree/core/tree.hpp"
#include "stabletree/oracle/oracle.hpp"
#include "stabletree/random.hpp"
#include "stabletree/sampler/sampler.hpp"

namespace stabletree::builder {

enum class LeafMode {
  /// Mean oracle probability vector over the node's pseudo sample.
  SoftMean,
  /// Frequencies of the oracle's argmax class over the pseudo sample.
  HardVote,
};

struct BuildConfig {
  /// Level of the better-split test; 1.0 disables testing (greedy CART on
  /// n_initial pseudo samples per node).
  double alpha = 0.1;
  std::size_t n_initial = 1000;
  /// Per-node pseudo-sample cutoff.
  std::size_t n_ps_max = 100000;
  double growth_cap = 4.0;
  std::size_t max_rounds = 20;
  /// Root is depth 1.
  std::size_t max_depth = 5;
  std::size_t min_node_anchors = 5;
  double purity_epsilon = 1e-3;
  /// FDR level for discarding rivals that are significantly worse than the best.
  double prune_q = 0.05;
  /// Replace oracle probabilities by one-hot argmax labels before any statistic.
  bool hard_labels = false;
  LeafMode leaf_mode = LeafMode::SoftMean;
  /// Start each child from its parent's final pseudo sample restricted to the
  /// child region.
  bool inherit_samples = false;
  /// Top every node's pool up to n_initial with fresh draws. With
  /// inherit_samples on and top_up off the whole tree is grown from the root's
  /// single pseudo sample (the CART baseline when alpha = 1).
  bool top_up = true;
  std::uint64_t seed = 0;
  sampler::SamplerConfig sampler;

  [[nodiscard]] bool testing_enabled() const { return alpha < 1.0; }
  void validate() const;
};

struct CandidateSet {
  std::vector<core::SplitRule> rules;  // sorted by (column, threshold)
  std::vector<char> live;
  /// Latest p-value against the current best (NaN when not tested).
  std::vector<double> pvalues;

  [[nodiscard]] std::size_t size() const { return rules.size(); }
  [[nodiscard]] bool empty() const { return rules.empty(); }
  [[nodiscard]] std::size_t live_count() const;
};

/// Midpoints of adjacent distinct anchor values, per column, restricted to the
/// open region interval.
CandidateSet enumerate_candidates(const sampler::NodeContext& ctx);

struct SplitDecision {
  /// Empty when every candidate leaves a child empty on the pseudo sample.
  std::optional<core::SplitRule> rule;
  core::NodeDiagnostics diagnostics;
};

/// Observes every pseudo-sample draw (for auditing region safety and sample use).
class BuildObserver {
 public:
  virtual ~BuildObserver() = default;
  virtual void on_draw(const std::string& node_path, const core::Region& region,
                       const core::LabeledBatch& batch) = 0;
};

/// The sequential split search at one node. `pool` holds the node's pseudo
/// sample on entry and is extended in place with each escalation round.
SplitDecision select_split(const sampler::NodeContext& ctx, CandidateSet& candidates,
                           const oracle::Oracle& oracle, const BuildConfig& cfg, SeedPath stream,
                           core::LabeledBatch& pool, const std::string& node_path = {},
                           BuildObserver* observer = nullptr);

/// Convenience overload starting from a fresh draw of n_initial samples.
SplitDecision select_split(const sampler::NodeContext& ctx, CandidateSet& candidates,
                           const oracle::Oracle& oracle, const BuildConfig& cfg, SeedPath stream);

/// Stabilized approximation tree. Deterministic given (data, oracle, cfg).
/// Failures are rethrown with the node path (e.g. "root/L/R") prepended.
core::Tree build_tree(const core::Dataset& data, const oracle::Oracle& oracle, const BuildConfig& cfg,
                      BuildObserver* observer = nullptr);

/// Pseudo-sample stream of one node and escalation round; shared with tests
/// that replay a build.
SeedPath node_stream(std::uint64_t seed, const std::string& node_path, std::size_t round);

/// Zero-bandwidth columns fall back to these (Silverman over all rows).
std::vector<double> global_bandwidths(const core::Dataset& data);

/// mean |y_i|^2 - |mean y|^2: the part of the node impurity any split could remove.
double reducible_impurity(const core::LabeledBatch& pool);

void to_hard_labels(core::LabeledBatch& pool);

/// Rows of pool routed to each side of rule.
std::pair<core::LabeledBatch, core::LabeledBatch> partition(const core::LabeledBatch& pool,
                                                            const core::SplitRule& rule);

/// Configuration of the CART baseline: testing off, one pseudo sample of
/// n_ps_max rows drawn at the root and shared down the tree.
BuildConfig cart_baseline(BuildConfig cfg);

}  // namespace stabletree::builder
