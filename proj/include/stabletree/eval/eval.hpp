#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stabletree/builder/builder.hpp"
#include "stabletree/core/schema.hpp"
#include "stabletree/core/tree.hpp"
#include "stabletree/oracle/oracle.hpp"

namespace stabletree::eval {

struct MimicReport {
  /// Mean over rows of sum_j |p_tree,j - p_oracle,j|; in [0, 2].
  double l1_prob_diff = 0.0;
  /// Fraction of rows where the argmax classes agree.
  double class_agreement = 0.0;
  std::size_t n_test = 0;
};

MimicReport mimic_accuracy(const core::Tree& tree, const oracle::Oracle& oracle, const core::Matrix& test_rows);

/// Fraction of labeled rows whose predicted argmax equals the label.
double predictive_accuracy(const core::Tree& tree, const core::Dataset& labeled);
double predictive_accuracy(const oracle::Oracle& model, const core::Dataset& labeled);

/// Canonical text of the top `depth` split layers. Each internal node prints
/// as (column:k) with k = round(threshold / tolerance[column]); leaves print
/// as L; nodes below the requested layers are omitted.
std::string structure_key(const core::Tree& tree, std::size_t depth, double tolerance);
std::string structure_key(const core::Tree& tree, std::size_t depth, std::span<const double> tolerances);

/// relative * (max - min) of each column over the rows (relative when the
/// column is constant).
std::vector<double> default_tolerances(const core::Dataset& data, double relative = 1e-3);

struct StabilityOptions {
  /// Per-column rounding; empty means default_tolerances(data).
  std::vector<double> tolerances;
  /// Reuse cfg.seed for every replicate instead of seed+1..seed+R.
  bool fixed_seed = false;
  /// Replicates built concurrently.
  std::size_t threads = 1;
};

struct ReplicateRecord {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<std::string> keys;  // one per requested depth
  std::size_t internal_nodes = 0;
  std::size_t cutoff_nodes = 0;
  std::size_t pseudo_samples = 0;
  double seconds = 0.0;
};

inline constexpr const char* failed_key = "<build failed>";

struct StabilityReport {
  std::size_t replicates = 0;
  std::vector<std::size_t> depths;
  std::vector<double> threshold_tolerance;
  /// histograms[i] counts structure keys at depths[i]; failed builds count
  /// under failed_key so every histogram sums to replicates.
  std::vector<std::map<std::string, std::size_t>> histograms;
  std::vector<ReplicateRecord> records;

  [[nodiscard]] std::size_t depth_index(std::size_t depth) const;
  [[nodiscard]] std::size_t unique_count(std::size_t depth) const;
  /// Largest count in the histogram at `depth` and its key.
  [[nodiscard]] std::pair<std::string, std::size_t> modal(std::size_t depth) const;
  [[nodiscard]] std::size_t failures() const;
};

StabilityReport stability_experiment(const core::Dataset& data, const oracle::Oracle& oracle,
                                     const builder::BuildConfig& cfg, std::size_t replicates,
                                     std::vector<std::size_t> depths, const StabilityOptions& options = {});

nlohmann::json to_json(const MimicReport& report);
nlohmann::json to_json(const StabilityReport& report);
std::string to_text(const MimicReport& report);
std::string to_text(const StabilityReport& report);
/// replicate,seed,depth,key rows for external plotting.
std::string keys_csv(const StabilityReport& report);

}  // namespace stabletree::eval
