#include "stabletree/core/tree_io.hpp"

#include <sstream>

#include "stabletree/core/dataset_io.hpp"
#include "stabletree/error.hpp"

namespace stabletree::core {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "stabletree.tree";
constexpr int kVersion = 1;

json node_to_json(const Tree& tree, NodeId id) {
  const auto& node = tree.node(id);
  if (const auto* in = std::get_if<InternalNode>(&node)) {
    const auto& d = in->diagnostics;
    json diag{{"pseudo_samples_used", d.pseudo_samples_used},
              {"aggregate_pvalue", d.final_aggregate_pvalue ? json(*d.final_aggregate_pvalue) : json()},
              {"cutoff_reached", d.cutoff_reached},
              {"candidates_considered", d.candidates_considered},
              {"candidates_surviving", d.candidates_surviving},
              {"rounds", d.rounds},
              {"gini_index", d.gini_index}};
    return json{{"rule", {{"column", in->rule.column}, {"threshold", in->rule.threshold}}},
                {"left", node_to_json(tree, in->left)},
                {"right", node_to_json(tree, in->right)},
                {"diagnostics", std::move(diag)}};
  }
  const auto& leaf = std::get<LeafNode>(node);
  return json{{"probs", leaf.class_probs}, {"pseudo_samples_used", leaf.pseudo_samples_used}};
}

NodeId node_from_json(Tree& tree, const json& j, std::size_t depth) {
  if (depth > 256) throw DataError("tree nesting too deep");
  const NodeId id = tree.reserve_node();
  if (j.contains("rule")) {
    InternalNode in;
    in.rule.column = j.at("rule").at("column").get<std::size_t>();
    in.rule.threshold = j.at("rule").at("threshold").get<double>();
    check_rule(in.rule, tree.schema());
    if (j.contains("diagnostics")) {
      const auto& d = j.at("diagnostics");
      in.diagnostics.pseudo_samples_used = d.value("pseudo_samples_used", std::size_t{0});
      if (d.contains("aggregate_pvalue") && !d.at("aggregate_pvalue").is_null())
        in.diagnostics.final_aggregate_pvalue = d.at("aggregate_pvalue").get<double>();
      in.diagnostics.cutoff_reached = d.value("cutoff_reached", false);
      in.diagnostics.candidates_considered = d.value("candidates_considered", std::size_t{0});
      in.diagnostics.candidates_surviving = d.value("candidates_surviving", std::size_t{0});
      in.diagnostics.rounds = d.value("rounds", std::size_t{0});
      in.diagnostics.gini_index = d.value("gini_index", 0.0);
    }
    in.left = node_from_json(tree, j.at("left"), depth + 1);
    in.right = node_from_json(tree, j.at("right"), depth + 1);
    tree.set_node(id, std::move(in));
  } else {
    auto probs = j.at("probs").get<std::vector<double>>();
    if (probs.size() != tree.schema().class_count())
      throw DataError("leaf has " + std::to_string(probs.size()) + " probabilities, schema has " +
                      std::to_string(tree.schema().class_count()) + " classes");
    tree.set_node(id, Tree::make_leaf(std::move(probs), j.value("pseudo_samples_used", std::size_t{0})));
  }
  return id;
}

}  // namespace

json tree_to_json(const Tree& tree) {
  if (tree.empty()) throw ContractError("cannot export an empty tree");
  return json{{"format", kFormat},
              {"version", kVersion},
              {"schema", schema_to_json(tree.schema())},
              {"schema_digest", digest_hex(tree.schema_digest())},
              {"root", node_to_json(tree, tree.root())}};
}

Tree tree_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != kFormat) throw DataError("not a stabletree tree file");
    if (j.value("version", 0) != kVersion)
      throw DataError("unsupported tree format version " + std::to_string(j.value("version", 0)));
    Tree tree(schema_from_json(j.at("schema")));
    const auto stored = j.at("schema_digest").get<std::string>();
    if (stored != digest_hex(tree.schema_digest()))
      throw IncompatibleTreeError("schema digest " + stored + " does not match embedded schema (" +
                                  digest_hex(tree.schema_digest()) + ")");
    node_from_json(tree, j.at("root"), 0);
    tree.validate();
    return tree;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed tree file: ") + e.what());
  } catch (const InvariantError& e) {
    throw DataError(std::string("invalid tree: ") + e.what());
  }
}

std::string tree_to_string(const Tree& tree) { return tree_to_json(tree).dump(1) + "\n"; }

void write_tree(const Tree& tree, const std::filesystem::path& path) {
  write_text_file(path, tree_to_string(tree));
}

Tree read_tree(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return tree_from_json(j);
}

std::string tree_to_dot(const Tree& tree) {
  std::ostringstream out;
  out.precision(6);
  out << "digraph stabletree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  const auto& schema = tree.schema();
  for (NodeId id = 0; id < tree.nodes().size(); ++id) {
    const auto& node = tree.node(id);
    if (const auto* in = std::get_if<InternalNode>(&node)) {
      out << "  n" << id << " [label=\"" << schema.column(in->rule.column).name
          << " <= " << in->rule.threshold << "\\nn=" << in->diagnostics.pseudo_samples_used;
      if (in->diagnostics.cutoff_reached) out << " (cutoff)";
      out << "\"];\n";
      out << "  n" << id << " -> n" << in->left << " [label=\"yes\"];\n";
      out << "  n" << id << " -> n" << in->right << " [label=\"no\"];\n";
    } else {
      const auto& leaf = std::get<LeafNode>(node);
      out << "  n" << id << " [shape=ellipse, label=\""
          << schema.class_labels()[leaf.predicted_class] << "\\n";
      for (std::size_t j = 0; j < leaf.class_probs.size(); ++j)
        out << (j ? " / " : "") << leaf.class_probs[j];
      out << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace stabletree::core
