#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stabletree/core/schema.hpp"

namespace stabletree::oracle {

/// The black box being distilled: class probabilities at arbitrary points.
/// Implementations must be safe to call from several threads at once.
class Oracle {
 public:
  virtual ~Oracle() = default;

  [[nodiscard]] virtual std::size_t class_count() const = 0;
  [[nodiscard]] virtual std::size_t feature_count() const = 0;

  /// One probability row per input row, batch order preserved. An empty
  /// batch yields an empty matrix.
  [[nodiscard]] virtual core::Matrix predict_proba(const core::Matrix& rows) const = 0;

  [[nodiscard]] virtual std::string describe() const = 0;
};

using OracleHandle = std::shared_ptr<const Oracle>;

/// Throws OracleIoError unless every row has k entries in [0, 1] summing to
/// 1 within tol.
void check_probabilities(const core::Matrix& probs, std::size_t rows, std::size_t k,
                         double tol = 1e-9);

/// Returns the same distribution everywhere.
class ConstantOracle final : public Oracle {
 public:
  ConstantOracle(std::vector<double> probs, std::size_t feature_count);

  [[nodiscard]] std::size_t class_count() const override { return probs_.size(); }
  [[nodiscard]] std::size_t feature_count() const override { return features_; }
  [[nodiscard]] core::Matrix predict_proba(const core::Matrix& rows) const override;
  [[nodiscard]] std::string describe() const override { return "constant"; }

 private:
  std::vector<double> probs_;
  std::size_t features_;
};

/// Adapts a per-row callable; handy for analytic oracles.
class FunctionOracle final : public Oracle {
 public:
  using RowFn = std::function<std::vector<double>(std::span<const double>)>;
  FunctionOracle(RowFn fn, std::size_t class_count, std::size_t feature_count,
                 std::string name = "function");

  [[nodiscard]] std::size_t class_count() const override { return k_; }
  [[nodiscard]] std::size_t feature_count() const override { return m_; }
  [[nodiscard]] core::Matrix predict_proba(const core::Matrix& rows) const override;
  [[nodiscard]] std::string describe() const override { return name_; }

 private:
  RowFn fn_;
  std::size_t k_;
  std::size_t m_;
  std::string name_;
};

}  // namespace stabletree::oracle
