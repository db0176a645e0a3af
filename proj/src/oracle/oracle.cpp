#include "stabletree/oracle/oracle.hpp"

#include <cmath>

#include "stabletree/error.hpp"

namespace stabletree::oracle {

void check_probabilities(const core::Matrix& probs, std::size_t rows, std::size_t k, double tol) {
  if (probs.rows != rows || (rows > 0 && probs.cols != k))
    throw OracleIoError("oracle returned a " + std::to_string(probs.rows) + "x" +
                        std::to_string(probs.cols) + " matrix, expected " + std::to_string(rows) +
                        "x" + std::to_string(k));
  for (std::size_t i = 0; i < probs.rows; ++i) {
    double sum = 0.0;
    for (double p : probs.row(i)) {
      if (!(p >= 0.0 && p <= 1.0))
        throw OracleIoError("oracle probability outside [0, 1] in row " + std::to_string(i));
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
      throw OracleIoError("oracle probabilities in row " + std::to_string(i) + " sum to " +
                          std::to_string(sum));
  }
}

ConstantOracle::ConstantOracle(std::vector<double> probs, std::size_t feature_count)
    : probs_(std::move(probs)), features_(feature_count) {
  core::check_probability_vector(probs_);
}

core::Matrix ConstantOracle::predict_proba(const core::Matrix& rows) const {
  core::Matrix out(rows.rows, probs_.size());
  for (std::size_t i = 0; i < rows.rows; ++i) std::copy(probs_.begin(), probs_.end(), out.row(i).begin());
  return out;
}

FunctionOracle::FunctionOracle(RowFn fn, std::size_t class_count, std::size_t feature_count,
                               std::string name)
    : fn_(std::move(fn)), k_(class_count), m_(feature_count), name_(std::move(name)) {}

core::Matrix FunctionOracle::predict_proba(const core::Matrix& rows) const {
  core::Matrix out(rows.rows, k_);
  for (std::size_t i = 0; i < rows.rows; ++i) {
    const auto p = fn_(rows.row(i));
    if (p.size() != k_) throw OracleIoError("function oracle returned wrong width");
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace stabletree::oracle
