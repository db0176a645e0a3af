#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "stabletree/core/tree.hpp"

namespace stabletree::core {

/// Self-contained export: the schema travels with the tree so front ends need
/// nothing else. Internal nodes are {"rule":{"column","threshold"},"left","right",
/// "diagnostics"}; leaves are {"probs":[...]}.
nlohmann::json tree_to_json(const Tree& tree);

/// Verifies the embedded schema digest; throws IncompatibleTreeError or DataError.
Tree tree_from_json(const nlohmann::json& j);

/// Canonical text form; identical trees serialize to identical bytes.
std::string tree_to_string(const Tree& tree);

void write_tree(const Tree& tree, const std::filesystem::path& path);
Tree read_tree(const std::filesystem::path& path);

/// Graphviz rendering for inspection.
std::string tree_to_dot(const Tree& tree);

}  // namespace stabletree::core
