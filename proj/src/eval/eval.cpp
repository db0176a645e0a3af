#include "stabletree/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "stabletree/error.hpp"
#include "stabletree/parallel.hpp"

namespace stabletree::eval {

using core::InternalNode;
using core::LeafNode;

namespace {

void check_rows(const core::Schema& schema, const core::Matrix& rows) {
  if (rows.cols != schema.column_count())
    throw SchemaError("rows have " + std::to_string(rows.cols) + " columns, schema has " +
                      std::to_string(schema.column_count()));
  for (std::size_t i = 0; i < rows.rows; ++i) schema.check_row(rows.row(i));
}

void check_labeled(const core::Dataset& labeled) {
  if (!labeled.has_labels()) throw DataError("accuracy needs labeled rows");
  if (labeled.size() == 0) throw DataError("accuracy needs at least one row");
}

}  // namespace

MimicReport mimic_accuracy(const core::Tree& tree, const oracle::Oracle& oracle, const core::Matrix& test_rows) {
  if (test_rows.rows == 0) throw DataError("mimic_accuracy needs at least one test row");
  tree.check_compatible(tree.schema());
  check_rows(tree.schema(), test_rows);
  if (oracle.feature_count() != tree.schema().column_count() || oracle.class_count() != tree.schema().class_count())
    throw SchemaError("oracle and tree schema are incompatible");

  const auto probs = oracle.predict_proba(test_rows);
  MimicReport report;
  report.n_test = test_rows.rows;
  double l1 = 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < test_rows.rows; ++i) {
    const auto p_tree = core::predict_proba(tree, test_rows.row(i));
    const auto p_oracle = probs.row(i);
    for (std::size_t j = 0; j < p_tree.size(); ++j) l1 += std::abs(p_tree[j] - p_oracle[j]);
    if (core::argmax(p_tree) == core::argmax(p_oracle)) ++agree;
  }
  report.l1_prob_diff = l1 / static_cast<double>(report.n_test);
  report.class_agreement = static_cast<double>(agree) / static_cast<double>(report.n_test);
  return report;
}

double predictive_accuracy(const core::Tree& tree, const core::Dataset& labeled) {
  check_labeled(labeled);
  tree.check_compatible(labeled.schema);
  check_rows(labeled.schema, labeled.rows);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (static_cast<int>(core::argmax(core::predict_proba(tree, labeled.rows.row(i)))) == (*labeled.labels)[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labeled.size());
}

double predictive_accuracy(const oracle::Oracle& model, const core::Dataset& labeled) {
  check_labeled(labeled);
  if (model.feature_count() != labeled.schema.column_count() || model.class_count() != labeled.schema.class_count())
    throw SchemaError("model and data schema are incompatible");
  check_rows(labeled.schema, labeled.rows);
  const auto probs = model.predict_proba(labeled.rows);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (static_cast<int>(core::argmax(probs.row(i))) == (*labeled.labels)[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labeled.size());
}

namespace {

void append_key(const core::Tree& tree, core::NodeId id, std::size_t layer, std::size_t depth,
                std::span<const double> tol, std::string& out) {
  const auto& node = tree.node(id);
  if (const auto* leaf = std::get_if<LeafNode>(&node)) {
    (void)leaf;
    out += 'L';
    return;
  }
  const auto& in = std::get<InternalNode>(node);
  const double k = std::round(in.rule.threshold / tol[in.rule.column]);
  // "+ 0.0" folds -0 into 0 so the key does not depend on the sign of zero.
  out += '(' + std::to_string(in.rule.column) + ':' + std::to_string(static_cast<long long>(k + 0.0));
  if (layer < depth) {
    out += ' ';
    append_key(tree, in.left, layer + 1, depth, tol, out);
    out += ' ';
    append_key(tree, in.right, layer + 1, depth, tol, out);
  }
  out += ')';
}

}  // namespace

std::string structure_key(const core::Tree& tree, std::size_t depth, std::span<const double> tolerances) {
  if (depth < 1) throw ContractError("structure_key depth must be at least 1");
  if (tree.empty()) throw ContractError("structure_key of an empty tree");
  if (tolerances.size() != tree.schema().column_count())
    throw ContractError("one tolerance per column is required");
  for (double t : tolerances)
    if (!(t > 0.0)) throw ContractError("tolerances must be positive");
  std::string out;
  append_key(tree, tree.root(), 1, depth, tolerances, out);
  return out;
}

std::string structure_key(const core::Tree& tree, std::size_t depth, double tolerance) {
  const std::vector<double> tol(tree.schema().column_count(), tolerance);
  return structure_key(tree, depth, tol);
}

std::vector<double> default_tolerances(const core::Dataset& data, double relative) {
  std::vector<double> tol(data.schema.column_count(), relative);
  for (std::size_t c = 0; c < tol.size() && data.size() > 0; ++c) {
    double lo = data.rows(0, c), hi = lo;
    for (std::size_t i = 1; i < data.size(); ++i) {
      lo = std::min(lo, data.rows(i, c));
      hi = std::max(hi, data.rows(i, c));
    }
    if (hi > lo) tol[c] = relative * (hi - lo);
  }
  return tol;
}

std::size_t StabilityReport::depth_index(std::size_t depth) const {
  const auto it = std::find(depths.begin(), depths.end(), depth);
  if (it == depths.end()) throw ContractError("depth " + std::to_string(depth) + " not in report");
  return static_cast<std::size_t>(it - depths.begin());
}

std::size_t StabilityReport::unique_count(std::size_t depth) const { return histograms[depth_index(depth)].size(); }

std::pair<std::string, std::size_t> StabilityReport::modal(std::size_t depth) const {
  std::pair<std::string, std::size_t> best{"", 0};
  for (const auto& [key, count] : histograms[depth_index(depth)])
    if (count > best.second) best = {key, count};
  return best;
}

std::size_t StabilityReport::failures() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
}

StabilityReport stability_experiment(const core::Dataset& data, const oracle::Oracle& oracle,
                                     const builder::BuildConfig& cfg, std::size_t replicates,
                                     std::vector<std::size_t> depths, const StabilityOptions& options) {
  if (replicates < 2) throw ConfigError("stability needs at least 2 replicates");
  if (depths.empty()) throw ConfigError("stability needs at least one depth");
  for (auto d : depths)
    if (d < 1) throw ConfigError("depths must be at least 1");
  cfg.validate();

  StabilityReport report;
  report.replicates = replicates;
  report.depths = std::move(depths);
  report.threshold_tolerance = options.tolerances.empty() ? default_tolerances(data) : options.tolerances;
  if (report.threshold_tolerance.size() != data.schema.column_count())
    throw ConfigError("one threshold tolerance per column is required");
  report.records.resize(replicates);

  parallel_for(replicates, options.threads, [&](std::size_t r) {
    auto& rec = report.records[r];
    builder::BuildConfig rcfg = cfg;
    rcfg.seed = options.fixed_seed ? cfg.seed : cfg.seed + r + 1;
    rec.seed = rcfg.seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto tree = builder::build_tree(data, oracle, rcfg);
      for (auto d : report.depths) rec.keys.push_back(structure_key(tree, d, report.threshold_tolerance));
      for (const auto& node : tree.nodes()) {
        if (const auto* in = std::get_if<InternalNode>(&node)) {
          ++rec.internal_nodes;
          rec.pseudo_samples += in->diagnostics.pseudo_samples_used;
          if (in->diagnostics.cutoff_reached) ++rec.cutoff_nodes;
        } else {
          rec.pseudo_samples += std::get<LeafNode>(node).pseudo_samples_used;
        }
      }
      rec.ok = true;
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
      spdlog::warn("replicate {} (seed {}) failed: {}", r, rec.seed, e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  report.histograms.resize(report.depths.size());
  for (const auto& rec : report.records)
    for (std::size_t i = 0; i < report.depths.size(); ++i) ++report.histograms[i][rec.ok ? rec.keys[i] : failed_key];
  return report;
}

nlohmann::json to_json(const MimicReport& report) {
  return {{"l1_prob_diff", report.l1_prob_diff},
          {"class_agreement", report.class_agreement},
          {"n_test", report.n_test}};
}

nlohmann::json to_json(const StabilityReport& report) {
  nlohmann::json j;
  j["replicates"] = report.replicates;
  j["threshold_tolerance"] = report.threshold_tolerance;
  j["depths"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.depths.size(); ++i) {
    const auto d = report.depths[i];
    nlohmann::json hist = nlohmann::json::array();
    std::vector<std::pair<std::string, std::size_t>> entries(report.histograms[i].begin(), report.histograms[i].end());
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [key, count] : entries) hist.push_back({{"key", key}, {"count", count}});
    j["depths"].push_back({{"depth", d},
                           {"unique_structures", report.unique_count(d)},
                           {"modal_count", report.modal(d).second},
                           {"histogram", hist}});
  }
  j["records"] = nlohmann::json::array();
  for (const auto& rec : report.records) {
    nlohmann::json r{{"seed", rec.seed},
                     {"ok", rec.ok},
                     {"internal_nodes", rec.internal_nodes},
                     {"cutoff_nodes", rec.cutoff_nodes},
                     {"pseudo_samples", rec.pseudo_samples},
                     {"keys", rec.keys}};
    if (!rec.ok) r["error"] = rec.error;
    j["records"].push_back(std::move(r));
  }
  return j;
}

std::string to_text(const MimicReport& report) {
  std::ostringstream os;
  os << "rows             " << report.n_test << '\n';
  os << "class agreement  " << report.class_agreement << '\n';
  os << "mean L1 prob     " << report.l1_prob_diff << '\n';
  return os.str();
}

std::string to_text(const StabilityReport& report) {
  std::ostringstream os;
  os << "replicates " << report.replicates;
  if (report.failures() > 0) os << " (" << report.failures() << " failed)";
  os << "\n\ndepth  unique  modal\n";
  for (auto d : report.depths) {
    os.width(5);
    os << d << "  ";
    os.width(6);
    os << report.unique_count(d) << "  ";
    os.width(5);
    os << report.modal(d).second << '\n';
  }
  return os.str();
}

std::string keys_csv(const StabilityReport& report) {
  std::ostringstream os;
  os << "replicate,seed,depth,key\n";
  for (std::size_t r = 0; r < report.records.size(); ++r) {
    const auto& rec = report.records[r];
    for (std::size_t i = 0; i < report.depths.size(); ++i)
      os << r << ',' << rec.seed << ',' << report.depths[i] << ",\"" << (rec.ok ? rec.keys[i] : failed_key) << "\"\n";
  }
  return os.str();
}

}  // namespace stabletree::eval
