#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stabletree/core/schema.hpp"

namespace stabletree::core {

enum class Side { Left, Right };

/// Axis-aligned cut: x[column] <= threshold goes left, everything else right.
struct SplitRule {
  std::size_t column = 0;
  double threshold = 0.0;

  /// Lexicographic (column, threshold); used as the default split order.
  friend auto operator<=>(const SplitRule&, const SplitRule&) = default;
};

/// Throws SchemaError if the rule does not fit the schema: bad column, or an
/// ordinal threshold outside the open range between the lowest and highest level.
void check_rule(const SplitRule& rule, const Schema& schema);

Side route(const SplitRule& rule, std::span<const double> x);

/// Half-open interval (lower, upper].
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  [[nodiscard]] bool contains(double v) const { return lower < v && v <= upper; }
  [[nodiscard]] bool strictly_inside(double t) const { return lower < t && t < upper; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Conjunction of the rules along a root-to-node path, stored as one interval
/// per column. Ordinal columns admit the integer levels inside their interval.
class Region {
 public:
  Region() = default;
  explicit Region(const Schema& schema);

  [[nodiscard]] std::size_t column_count() const { return bounds_.size(); }
  [[nodiscard]] const Interval& bounds(std::size_t c) const { return bounds_.at(c); }
  [[nodiscard]] bool contains(std::span<const double> x) const;

  /// Integer levels admitted for ordinal column c.
  [[nodiscard]] std::pair<int, int> level_range(std::size_t c) const;

  [[nodiscard]] bool is_ordinal(std::size_t c) const { return ordinal_levels_.at(c) > 0; }

  [[nodiscard]] std::string describe(const Schema& schema) const;

  friend bool operator==(const Region&, const Region&) = default;

 private:
  friend Region refine(const Region&, const SplitRule&, Side);

  std::vector<Interval> bounds_;
  std::vector<int> ordinal_levels_;  // 0 for continuous columns
};

/// Restricts region to one side of rule. Throws DegenerateSplitError when the
/// threshold is not strictly inside the region's interval for that column or
/// the result would admit no ordinal level.
Region refine(const Region& region, const SplitRule& rule, Side side);

}  // namespace stabletree::core
