#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "stabletree/core/schema.hpp"

namespace stabletree::synth {

/// Piecewise-constant logit of P(Y = 1 | x) on [0,1]^5, seven cases:
///   0:  2   x1 > 0.5,  x2 > 0.7
///   1: -3   x1 > 0.5,  0.2 < x2 <= 0.7
///   2: -4   x1 > 0.5,  x2 <= 0.2
///   3:  3   x1 <= 0.5, x5 <= 0.5, x3 + x4^2 >= 1.4
///   4:  2   x1 <= 0.5, x5 <= 0.5, 0.5 <= x3 + x4^2 < 1.4
///   5: -2   x1 <= 0.5, x5 <= 0.5, x3 + x4^2 < 0.5
///   6:  2   x1 <= 0.5, x5 > 0.5
inline constexpr std::array<double, 7> case_logits{2.0, -3.0, -4.0, 3.0, 2.0, -2.0, 2.0};

/// Case index of x (exactly one case matches every point of R^5).
int case_of(std::span<const double> x);
bool case_matches(int case_index, std::span<const double> x);

double logit(std::span<const double> x);
double sigmoid(double z);
double prob_one(std::span<const double> x);

/// Columns x1..x5 (continuous), classes "0" and "1".
core::Schema schema();

/// n rows with x ~ Uniform[0,1]^5 and y ~ Bernoulli(prob_one(x)). Rows are
/// produced in fixed blocks with their own substreams.
core::Dataset sample_synthetic(std::size_t n, std::uint64_t seed);

/// Covariates only, for fresh test rows.
core::Matrix sample_covariates(std::size_t n, std::uint64_t seed);

}  // namespace stabletree::synth
