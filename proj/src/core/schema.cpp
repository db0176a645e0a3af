#include "stabletree/core/schema.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "stabletree/core/dataset_io.hpp"
#include "stabletree/error.hpp"
#include "stabletree/random.hpp"

namespace stabletree::core {

ColumnSpec ColumnSpec::continuous(std::string name) {
  return ColumnSpec{std::move(name), ColumnKind::Continuous, 0, {}};
}

ColumnSpec ColumnSpec::ordinal(std::string name, int level_count,
                               std::vector<std::string> labels) {
  return ColumnSpec{std::move(name), ColumnKind::Ordinal, level_count, std::move(labels)};
}

Schema::Schema(std::vector<ColumnSpec> columns, std::vector<std::string> class_labels,
               std::string label_column)
    : columns_(std::move(columns)),
      class_labels_(std::move(class_labels)),
      label_column_(std::move(label_column)) {
  if (columns_.empty()) throw SchemaError("schema has no columns");
  if (class_labels_.size() < 2) throw SchemaError("schema needs at least 2 classes");
  std::set<std::string> names;
  for (const auto& col : columns_) {
    if (col.name.empty()) throw SchemaError("column with empty name");
    if (!names.insert(col.name).second) throw SchemaError("duplicate column name '" + col.name + "'");
    if (col.is_ordinal()) {
      if (col.level_count < 2)
        throw SchemaError("ordinal column '" + col.name + "' needs at least 2 levels");
      if (!col.level_labels.empty() &&
          col.level_labels.size() != static_cast<std::size_t>(col.level_count))
        throw SchemaError("ordinal column '" + col.name + "' has " +
                          std::to_string(col.level_labels.size()) + " labels for " +
                          std::to_string(col.level_count) + " levels");
    }
  }
  if (names.contains(label_column_))
    throw SchemaError("label column '" + label_column_ + "' collides with a covariate");
}

const ColumnSpec& Schema::column(std::size_t c) const {
  if (c >= columns_.size())
    throw SchemaError("column index " + std::to_string(c) + " out of range (" +
                      std::to_string(columns_.size()) + " columns)");
  return columns_[c];
}

std::optional<std::size_t> Schema::find_column(const std::string& name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c].name == name) return c;
  return std::nullopt;
}

void Schema::check_row(std::span<const double> x) const {
  if (x.size() != columns_.size())
    throw SchemaError("row has " + std::to_string(x.size()) + " values, schema has " +
                      std::to_string(columns_.size()) + " columns");
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double v = x[c];
    if (!std::isfinite(v)) throw SchemaError("non-finite value in column '" + columns_[c].name + "'");
    if (columns_[c].is_ordinal() &&
        (v != std::floor(v) || v < 0 || v > columns_[c].level_count - 1))
      throw SchemaError("value " + std::to_string(v) + " is not a level of ordinal column '" +
                        columns_[c].name + "'");
  }
}

std::uint64_t Schema::digest() const { return fnv1a64(schema_to_json(*this).dump()); }

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

void Matrix::append_row(std::span<const double> r) {
  if (rows == 0 && cols == 0) cols = r.size();
  if (r.size() != cols) throw ContractError("append_row: width mismatch");
  values.insert(values.end(), r.begin(), r.end());
  ++rows;
}

Dataset::Dataset(Schema s, Matrix r, std::optional<std::vector<int>> l)
    : schema(std::move(s)), rows(std::move(r)), labels(std::move(l)) {
  validate();
}

void Dataset::validate() const {
  if (rows.rows > 0 && rows.cols != schema.column_count())
    throw SchemaError("dataset has " + std::to_string(rows.cols) + " columns, schema has " +
                      std::to_string(schema.column_count()));
  for (std::size_t i = 0; i < rows.rows; ++i) {
    try {
      schema.check_row(rows.row(i));
    } catch (const SchemaError& e) {
      throw SchemaError("row " + std::to_string(i) + ": " + e.what());
    }
  }
  if (labels) {
    if (labels->size() != rows.rows)
      throw DataError("label vector has " + std::to_string(labels->size()) + " entries for " +
                      std::to_string(rows.rows) + " rows");
    for (std::size_t i = 0; i < labels->size(); ++i) {
      const int l = (*labels)[i];
      if (l < 0 || static_cast<std::size_t>(l) >= schema.class_count())
        throw DataError("row " + std::to_string(i) + ": label " + std::to_string(l) +
                        " outside 0.." + std::to_string(schema.class_count() - 1));
    }
  }
}

void LabeledBatch::append(const LabeledBatch& other) {
  if (other.size() == 0) return;
  if (size() == 0) {
    *this = other;
    return;
  }
  if (other.x.cols != x.cols || other.y.cols != y.cols) throw ContractError("batch shape mismatch");
  x.values.insert(x.values.end(), other.x.values.begin(), other.x.values.end());
  y.values.insert(y.values.end(), other.y.values.begin(), other.y.values.end());
  x.rows += other.x.rows;
  y.rows += other.y.rows;
}

std::vector<SoftLabeledSample> LabeledBatch::to_samples() const {
  std::vector<SoftLabeledSample> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[i].x.assign(x.row(i).begin(), x.row(i).end());
    out[i].y.assign(y.row(i).begin(), y.row(i).end());
  }
  return out;
}

std::vector<double> LabeledBatch::mean_label() const {
  std::vector<double> mean(y.cols, 0.0);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) mean[j] += y(i, j);
  for (auto& v : mean) v /= static_cast<double>(y.rows);
  return mean;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

void check_probability_vector(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ContractError("probability vector has a negative or NaN component");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol)
    throw ContractError("probability vector sums to " + std::to_string(sum));
}

}  // namespace stabletree::core
