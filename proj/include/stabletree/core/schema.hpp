#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stabletree::core {

enum class ColumnKind { Continuous, Ordinal };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  /// Number of levels for ordinal columns (levels are 0..level_count-1).
  int level_count = 0;
  /// Optional display names for ordinal levels, used by questionnaire front ends.
  std::vector<std::string> level_labels;

  static ColumnSpec continuous(std::string name);
  static ColumnSpec ordinal(std::string name, int level_count,
                            std::vector<std::string> labels = {});

  [[nodiscard]] bool is_ordinal() const { return kind == ColumnKind::Ordinal; }

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Covariate layout plus the response levels. Validated on construction.
class Schema {
 public:
  Schema() = default;
  Schema(std::vector<ColumnSpec> columns, std::vector<std::string> class_labels,
         std::string label_column = "label");

  [[nodiscard]] const std::vector<ColumnSpec>& columns() const { return columns_; }
  [[nodiscard]] const ColumnSpec& column(std::size_t c) const;
  [[nodiscard]] std::size_t column_count() const { return columns_.size(); }
  [[nodiscard]] std::size_t class_count() const { return class_labels_.size(); }
  [[nodiscard]] const std::vector<std::string>& class_labels() const { return class_labels_; }
  [[nodiscard]] const std::string& label_column() const { return label_column_; }
  [[nodiscard]] std::optional<std::size_t> find_column(const std::string& name) const;

  /// Throws SchemaError unless x has one value per column and every ordinal
  /// value is an admissible integer level.
  void check_row(std::span<const double> x) const;

  /// Stable 64-bit checksum over the canonical JSON form.
  [[nodiscard]] std::uint64_t digest() const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::vector<std::string> class_labels_;
  std::string label_column_ = "label";
};

std::string digest_hex(std::uint64_t digest);

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  [[nodiscard]] std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  void append_row(std::span<const double> r);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Original sample: covariates and optional hard labels.
struct Dataset {
  Schema schema;
  Matrix rows;
  std::optional<std::vector<int>> labels;

  Dataset() = default;
  Dataset(Schema s, Matrix r, std::optional<std::vector<int>> l = std::nullopt);

  [[nodiscard]] std::size_t size() const { return rows.rows; }
  [[nodiscard]] bool has_labels() const { return labels.has_value(); }
  void validate() const;
};

/// One pseudo observation: a covariate row and the oracle's class probabilities.
struct SoftLabeledSample {
  std::vector<double> x;
  std::vector<double> y;

  friend bool operator==(const SoftLabeledSample&, const SoftLabeledSample&) = default;
};

/// Columnar pseudo sample: covariates (n x m) and soft labels (n x k).
struct LabeledBatch {
  Matrix x;
  Matrix y;

  [[nodiscard]] std::size_t size() const { return x.rows; }
  void append(const LabeledBatch& other);
  [[nodiscard]] std::vector<SoftLabeledSample> to_samples() const;
  /// Column means of y.
  [[nodiscard]] std::vector<double> mean_label() const;

  friend bool operator==(const LabeledBatch&, const LabeledBatch&) = default;
};

/// Index of the largest entry; exact ties resolve to the lowest index.
std::size_t argmax(std::span<const double> v);

/// Throws ContractError unless p is a probability vector (non-negative, sums
/// to 1 within tol).
void check_probability_vector(std::span<const double> p, double tol = 1e-9);

}  // namespace stabletree::core
