#include "stabletree/core/tree.hpp"

#include <cmath>
#include <functional>

#include "stabletree/error.hpp"

namespace stabletree::core {

Tree::Tree(Schema schema) : schema_(std::move(schema)), schema_digest_(schema_.digest()) {}

NodeId Tree::reserve_node() {
  nodes_.emplace_back(LeafNode{});
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tree::set_node(NodeId id, TreeNode node) { nodes_.at(id) = std::move(node); }

LeafNode Tree::make_leaf(std::vector<double> class_probs, std::size_t pseudo_samples) {
  LeafNode leaf;
  leaf.predicted_class = argmax(class_probs);
  leaf.class_probs = std::move(class_probs);
  leaf.pseudo_samples_used = pseudo_samples;
  return leaf;
}

std::size_t Tree::depth() const {
  if (nodes_.empty()) return 0;
  std::function<std::size_t(NodeId)> walk = [&](NodeId id) -> std::size_t {
    if (const auto* in = std::get_if<InternalNode>(&nodes_[id]))
      return 1 + std::max(walk(in->left), walk(in->right));
    return 1;
  };
  return walk(root());
}

std::size_t Tree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += std::holds_alternative<LeafNode>(node);
  return n;
}

std::size_t Tree::internal_count() const { return nodes_.size() - leaf_count(); }

void Tree::validate(std::optional<std::size_t> max_depth) const {
  if (nodes_.empty()) throw InvariantError("tree has no nodes");
  std::vector<int> visits(nodes_.size(), 0);
  const std::size_t k = schema_.class_count();
  std::function<void(NodeId, std::size_t)> walk = [&](NodeId id, std::size_t depth) {
    if (id >= nodes_.size()) throw InvariantError("child index out of range");
    if (++visits[id] > 1) throw InvariantError("node reachable twice");
    if (max_depth && depth > *max_depth)
      throw InvariantError("tree deeper than " + std::to_string(*max_depth));
    if (const auto* in = std::get_if<InternalNode>(&nodes_[id])) {
      if (in->left == id || in->right == id || in->left == in->right)
        throw InvariantError("internal node without two distinct children");
      check_rule(in->rule, schema_);
      walk(in->left, depth + 1);
      walk(in->right, depth + 1);
    } else {
      const auto& leaf = std::get<LeafNode>(nodes_[id]);
      if (leaf.class_probs.size() != k) throw InvariantError("leaf vector has wrong length");
      check_probability_vector(leaf.class_probs);
      if (leaf.predicted_class != argmax(leaf.class_probs))
        throw InvariantError("leaf predicted class is not the argmax");
    }
  };
  walk(root(), 1);
  for (int v : visits)
    if (v == 0) throw InvariantError("unreachable node in arena");
}

void Tree::check_compatible(const Schema& schema) const {
  if (schema_digest_ != schema_.digest())
    throw IncompatibleTreeError("tree schema digest " + digest_hex(schema_digest_) +
                                " does not match its embedded schema (" +
                                digest_hex(schema_.digest()) + ")");
  if (schema.digest() != schema_digest_)
    throw IncompatibleTreeError("tree was built for schema " + digest_hex(schema_digest_) +
                                ", got " + digest_hex(schema.digest()));
}

Prediction predict(const Tree& tree, std::span<const double> x) {
  if (tree.empty()) throw IncompatibleTreeError("empty tree");
  if (tree.schema_digest() != tree.schema().digest())
    throw IncompatibleTreeError("tree schema digest mismatch");
  if (x.size() != tree.schema().column_count())
    throw SchemaError("row has " + std::to_string(x.size()) + " values, tree expects " +
                      std::to_string(tree.schema().column_count()));
  Prediction out;
  NodeId id = tree.root();
  while (const auto* in = std::get_if<InternalNode>(&tree.node(id))) {
    const Side side = route(in->rule, x);
    out.path.push_back(in->rule);
    out.sides.push_back(side);
    id = side == Side::Left ? in->left : in->right;
  }
  const auto& leaf = std::get<LeafNode>(tree.node(id));
  out.class_probs = leaf.class_probs;
  out.predicted_class = leaf.predicted_class;
  out.leaf = id;
  return out;
}

std::span<const double> predict_proba(const Tree& tree, std::span<const double> x) {
  NodeId id = tree.root();
  while (const auto* in = std::get_if<InternalNode>(&tree.node(id)))
    id = route(in->rule, x) == Side::Left ? in->left : in->right;
  return std::get<LeafNode>(tree.node(id)).class_probs;
}

}  // namespace stabletree::core
