#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "stabletree/core/region.hpp"
#include "stabletree/core/schema.hpp"

namespace stabletree::core {

using NodeId = std::uint32_t;

/// Audit trail of the split search at one internal node.
struct NodeDiagnostics {
  std::size_t pseudo_samples_used = 0;
  /// Aggregate p-value of the last round; empty when no rival was tested.
  std::optional<double> final_aggregate_pvalue;
  bool cutoff_reached = false;
  std::size_t candidates_considered = 0;
  std::size_t candidates_surviving = 0;
  std::size_t rounds = 0;
  double gini_index = 0.0;

  friend bool operator==(const NodeDiagnostics&, const NodeDiagnostics&) = default;
};

struct InternalNode {
  SplitRule rule;
  NodeId left = 0;
  NodeId right = 0;
  NodeDiagnostics diagnostics;

  friend bool operator==(const InternalNode&, const InternalNode&) = default;
};

struct LeafNode {
  std::vector<double> class_probs;
  std::size_t predicted_class = 0;
  std::size_t pseudo_samples_used = 0;

  friend bool operator==(const LeafNode&, const LeafNode&) = default;
};

using TreeNode = std::variant<InternalNode, LeafNode>;

/// Binary classification tree over a schema. Nodes live in a flat arena; the
/// root is node 0 once the tree is complete.
class Tree {
 public:
  Tree() = default;
  explicit Tree(Schema schema);

  [[nodiscard]] const Schema& schema() const { return schema_; }
  [[nodiscard]] std::uint64_t schema_digest() const { return schema_digest_; }
  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
  [[nodiscard]] const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  [[nodiscard]] NodeId root() const { return 0; }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }

  /// Reserves a slot whose content is filled in later with set_node.
  NodeId reserve_node();
  void set_node(NodeId id, TreeNode node);

  static LeafNode make_leaf(std::vector<double> class_probs, std::size_t pseudo_samples = 0);

  [[nodiscard]] std::size_t depth() const;
  [[nodiscard]] std::size_t leaf_count() const;
  [[nodiscard]] std::size_t internal_count() const;

  /// Checks structural invariants; throws InvariantError on violation.
  void validate(std::optional<std::size_t> max_depth = std::nullopt) const;

  /// Throws IncompatibleTreeError when the tree was not built for `schema`
  /// or its stored digest no longer matches its own schema.
  void check_compatible(const Schema& schema) const;

  void set_schema_digest(std::uint64_t digest) { schema_digest_ = digest; }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  Schema schema_;
  std::uint64_t schema_digest_ = 0;
  std::vector<TreeNode> nodes_;
};

struct Prediction {
  std::span<const double> class_probs;
  std::size_t predicted_class = 0;
  NodeId leaf = 0;
  std::vector<SplitRule> path;
  std::vector<Side> sides;
};

/// Routes x to its leaf. Throws IncompatibleTreeError on a digest mismatch.
Prediction predict(const Tree& tree, std::span<const double> x);

/// Leaf probabilities only, without the path bookkeeping.
std::span<const double> predict_proba(const Tree& tree, std::span<const double> x);

}  // namespace stabletree::core
