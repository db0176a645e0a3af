#include "stabletree/synth/synth.hpp"

#include <algorithm>
#include <cmath>

#include "stabletree/error.hpp"
#include "stabletree/random.hpp"

namespace stabletree::synth {

namespace {
constexpr std::size_t block_rows = 1024;
}

bool case_matches(int case_index, std::span<const double> x) {
  if (x.size() != 5) throw ContractError("synthetic design has five covariates");
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4];
  const double s = x3 + x4 * x4;
  switch (case_index) {
    case 0: return x1 > 0.5 && x2 > 0.7;
    case 1: return x1 > 0.5 && 0.7 >= x2 && x2 > 0.2;
    case 2: return x1 > 0.5 && x2 <= 0.2;
    case 3: return x1 <= 0.5 && x5 <= 0.5 && s >= 1.4;
    case 4: return x1 <= 0.5 && x5 <= 0.5 && 1.4 > s && s >= 0.5;
    case 5: return x1 <= 0.5 && x5 <= 0.5 && s < 0.5;
    case 6: return x1 <= 0.5 && x5 > 0.5;
    default: throw ContractError("case index out of range");
  }
}

int case_of(std::span<const double> x) {
  if (x.size() != 5) throw ContractError("synthetic design has five covariates");
  if (x[0] > 0.5) {
    if (x[1] > 0.7) return 0;
    return x[1] > 0.2 ? 1 : 2;
  }
  if (x[4] > 0.5) return 6;
  const double s = x[2] + x[3] * x[3];
  if (s >= 1.4) return 3;
  return s >= 0.5 ? 4 : 5;
}

double logit(std::span<const double> x) { return case_logits[static_cast<std::size_t>(case_of(x))]; }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double prob_one(std::span<const double> x) { return sigmoid(logit(x)); }

core::Schema schema() {
  std::vector<core::ColumnSpec> cols;
  for (int j = 1; j <= 5; ++j) cols.push_back(core::ColumnSpec::continuous("x" + std::to_string(j)));
  return core::Schema(std::move(cols), {"0", "1"});
}

core::Matrix sample_covariates(std::size_t n, std::uint64_t seed) {
  core::Matrix x(n, 5);
  const SeedPath root = SeedPath(seed).child("synth");
  for (std::size_t start = 0, b = 0; start < n; start += block_rows, ++b) {
    auto rng = root.child(b).engine();
    for (std::size_t i = start; i < std::min(n, start + block_rows); ++i)
      for (std::size_t j = 0; j < 5; ++j) x(i, j) = uniform01(rng);
  }
  return x;
}

core::Dataset sample_synthetic(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("sample_synthetic needs n >= 1");
  core::Matrix x(n, 5);
  std::vector<int> labels(n);
  const SeedPath root = SeedPath(seed).child("synth");
  for (std::size_t start = 0, b = 0; start < n; start += block_rows, ++b) {
    auto rng = root.child(b).engine();
    for (std::size_t i = start; i < std::min(n, start + block_rows); ++i) {
      for (std::size_t j = 0; j < 5; ++j) x(i, j) = uniform01(rng);
      labels[i] = uniform01(rng) < prob_one(x.row(i)) ? 1 : 0;
    }
  }
  return core::Dataset(schema(), std::move(x), std::move(labels));
}

}  // namespace stabletree::synth
