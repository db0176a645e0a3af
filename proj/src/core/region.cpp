#include "stabletree/core/region.hpp"

#include <cmath>
#include <sstream>

#include "stabletree/error.hpp"

namespace stabletree::core {

void check_rule(const SplitRule& rule, const Schema& schema) {
  const auto& col = schema.column(rule.column);
  if (!std::isfinite(rule.threshold))
    throw SchemaError("non-finite threshold on column '" + col.name + "'");
  if (col.is_ordinal() && !(rule.threshold > 0.0 && rule.threshold < col.level_count - 1))
    throw SchemaError("threshold " + std::to_string(rule.threshold) +
                      " does not separate levels of ordinal column '" + col.name + "'");
}

Side route(const SplitRule& rule, std::span<const double> x) {
  if (rule.column >= x.size())
    throw SchemaError("rule column " + std::to_string(rule.column) + " out of range for row of " +
                      std::to_string(x.size()) + " values");
  return x[rule.column] <= rule.threshold ? Side::Left : Side::Right;
}

Region::Region(const Schema& schema)
    : bounds_(schema.column_count()), ordinal_levels_(schema.column_count(), 0) {
  for (std::size_t c = 0; c < schema.column_count(); ++c)
    if (schema.column(c).is_ordinal()) ordinal_levels_[c] = schema.column(c).level_count;
}

bool Region::contains(std::span<const double> x) const {
  if (x.size() != bounds_.size()) return false;
  for (std::size_t c = 0; c < x.size(); ++c)
    if (!bounds_[c].contains(x[c])) return false;
  return true;
}

std::pair<int, int> Region::level_range(std::size_t c) const {
  const auto& iv = bounds_.at(c);
  const int levels = ordinal_levels_.at(c);
  int lo = 0;
  int hi = levels - 1;
  if (std::isfinite(iv.lower)) lo = std::max(lo, static_cast<int>(std::floor(iv.lower)) + 1);
  if (std::isfinite(iv.upper)) hi = std::min(hi, static_cast<int>(std::floor(iv.upper)));
  return {lo, hi};
}

std::string Region::describe(const Schema& schema) const {
  std::ostringstream out;
  bool first = true;
  for (std::size_t c = 0; c < bounds_.size(); ++c) {
    const auto& iv = bounds_[c];
    if (!std::isfinite(iv.lower) && !std::isfinite(iv.upper)) continue;
    if (!first) out << " & ";
    first = false;
    if (std::isfinite(iv.lower)) out << iv.lower << " < ";
    out << schema.column(c).name;
    if (std::isfinite(iv.upper)) out << " <= " << iv.upper;
  }
  return first ? "(all)" : out.str();
}

Region refine(const Region& region, const SplitRule& rule, Side side) {
  if (rule.column >= region.bounds_.size())
    throw SchemaError("rule column " + std::to_string(rule.column) + " out of range");
  const Interval& iv = region.bounds_[rule.column];
  if (!iv.strictly_inside(rule.threshold)) {
    std::ostringstream msg;
    msg << "threshold " << rule.threshold << " on column " << rule.column
        << " lies outside region interval (" << iv.lower << ", " << iv.upper << "]";
    throw DegenerateSplitError(msg.str());
  }
  Region out = region;
  Interval& target = out.bounds_[rule.column];
  if (side == Side::Left)
    target.upper = rule.threshold;
  else
    target.lower = rule.threshold;
  if (out.is_ordinal(rule.column)) {
    const auto [lo, hi] = out.level_range(rule.column);
    if (lo > hi) {
      std::ostringstream msg;
      msg << "split at " << rule.threshold << " on ordinal column " << rule.column
          << " leaves no admissible level on the " << (side == Side::Left ? "left" : "right");
      throw DegenerateSplitError(msg.str());
    }
  }
  return out;
}

}  // namespace stabletree::core
