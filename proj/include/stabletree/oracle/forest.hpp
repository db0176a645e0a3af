#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "stabletree/core/schema.hpp"
#include "stabletree/oracle/oracle.hpp"

namespace stabletree::oracle {

struct ForestConfig {
  std::size_t tree_count = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_leaf = 1;
  /// ceil(sqrt(m)) when empty.
  std::optional<std::size_t> features_per_split;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  /// Return a constant oracle instead of failing on single-class data.
  bool allow_constant = false;
  std::size_t threads = 1;
};

/// One CART tree stored as a flat node array. Leaves hold training class
/// frequencies.
struct CartTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t leaf = 0;  // offset into leaf_probs / k

    friend bool operator==(const Node&, const Node&) = default;
  };
  std::vector<Node> nodes;
  std::vector<double> leaf_probs;

  [[nodiscard]] std::span<const double> leaf_for(std::span<const double> x, std::size_t k) const;
  friend bool operator==(const CartTree&, const CartTree&) = default;
};

/// Greedy Gini CART on hard labels, with optional per-split feature
/// subsampling. Exposed for the forest and for tests.
CartTree fit_cart(const core::Matrix& x, std::span<const int> labels, std::size_t class_count,
                  std::span<const std::size_t> rows, std::size_t features_per_split,
                  std::optional<std::size_t> max_depth, std::size_t min_leaf, std::mt19937_64& rng);

class RandomForest final : public Oracle {
 public:
  RandomForest(core::Schema schema, std::vector<CartTree> trees, ForestConfig config,
               double oob_accuracy);

  [[nodiscard]] std::size_t class_count() const override { return schema_.class_count(); }
  [[nodiscard]] std::size_t feature_count() const override { return schema_.column_count(); }
  /// Average over trees of each tree's leaf class-frequency vector.
  [[nodiscard]] core::Matrix predict_proba(const core::Matrix& rows) const override;
  [[nodiscard]] std::string describe() const override;

  [[nodiscard]] const core::Schema& schema() const { return schema_; }
  [[nodiscard]] const std::vector<CartTree>& trees() const { return trees_; }
  [[nodiscard]] const ForestConfig& config() const { return config_; }
  /// Out-of-bag accuracy over rows left out by at least one tree; NaN without bootstrap.
  [[nodiscard]] double oob_accuracy() const { return oob_accuracy_; }

  /// Worker cap for predict_proba; does not change results.
  void set_threads(std::size_t threads) { config_.threads = threads; }

  void save(const std::filesystem::path& path) const;
  [[nodiscard]] std::string serialize() const;
  static std::shared_ptr<RandomForest> load(const std::filesystem::path& path);
  static std::shared_ptr<RandomForest> deserialize(const std::string& bytes);

 private:
  core::Schema schema_;
  std::vector<CartTree> trees_;
  ForestConfig config_;
  double oob_accuracy_;
};

/// Bagged CART forest; deterministic given config.seed regardless of threads.
/// Throws DegenerateOracleError on single-class data unless allow_constant is
/// set, in which case every tree is a single leaf with the class frequencies.
std::shared_ptr<RandomForest> fit_forest(const core::Dataset& data, const ForestConfig& config);

}  // namespace stabletree::oracle
