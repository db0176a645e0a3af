#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "stabletree/core/region.hpp"
#include "stabletree/core/schema.hpp"

namespace stabletree::splitstat {

struct CandidateEval {
  bool active = false;
  /// A child is empty on this pool.
  bool degenerate = false;
  /// Set when an earlier candidate (in (column, threshold) order) induces the
  /// same partition of the pool.
  std::optional<std::size_t> duplicate_of;
  std::size_t n_left = 0;
  double gini_index = 0.0;
  /// Asymptotic variance of sqrt(n)(g_best - g_this); filled by the test pass.
  double comparison_variance = 0.0;
  double p_value = 0.0;

  [[nodiscard]] bool testable() const { return active && !degenerate && !duplicate_of; }
};

struct ScanResult {
  std::vector<CandidateEval> candidates;
  /// Minimal-Gini testable candidate; ties resolve to the earliest rule.
  std::optional<std::size_t> best;
  std::size_t n = 0;
};

/// Evaluates every active rule on the pool with one sorted sweep per column.
/// `rules` must be sorted by (column, threshold). When `with_tests` is set,
/// each testable rival also gets its comparison variance against the best and
/// the better-split p-value, computed from prefix sums of the per-sample
/// influence values rather than explicit 4k x 4k covariance matrices.
ScanResult scan_candidates(const core::LabeledBatch& pool, std::span<const core::SplitRule> rules,
                           std::span<const char> active, bool with_tests);

}  // namespace stabletree::splitstat
