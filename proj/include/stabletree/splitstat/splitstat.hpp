#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stabletree/core/region.hpp"
#include "stabletree/core/schema.hpp"

namespace stabletree::splitstat {

using core::SoftLabeledSample;
using core::SplitRule;

/// Standard normal helpers.
double normal_cdf(double z);
/// Upper-tail quantile: P(Z > upper_quantile(p)) = p.
double upper_quantile(double p);

/// Impurity 1 - sum_i p_i^2 of a class distribution.
double gini_gain_distribution(std::span<const double> class_probs);

/// Weighted child impurity 1 - (|S_l|^2/n_l + |S_r|^2/n_r)/n from child label
/// sums. Empty children contribute nothing. This is the estimator shared by the
/// forest's CART splitter and the stabilized split search.
double children_gini(double n_left, std::span<const double> sum_left, double n_right,
                     std::span<const double> sum_right);

struct GiniSummary {
  std::size_t n = 0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  std::vector<double> theta_left;   // mean soft label of the left child (zeros if empty)
  std::vector<double> theta_right;
  double gini_index = 0.0;
};

GiniSummary split_gini_index(std::span<const SoftLabeledSample> samples, const SplitRule& rule);

/// How the delta-method gradient of the Gini difference is formed.
enum class GradientForm {
  /// Full derivative of n_q/n * |theta_q|^2 with respect to the child label
  /// sums, including the randomness of the child proportion:
  /// block q of split p is -/+ (2 theta_q - |theta_q|^2).
  DeltaMethod,
  /// 2 * (-theta_1l, -theta_1r, +theta_2l, +theta_2r); treats child
  /// proportions as fixed.
  ProportionFixed,
  /// 2 * (-pi theta) blocks as printed in the derivation this package follows.
  Literal,
};

struct SplitComparisonStats {
  GiniSummary summary_1;
  GiniSummary summary_2;
  /// Covariance (denominator n) of (Y 1{G1=0}, Y 1{G1=1}, Y 1{G2=0}, Y 1{G2=1}).
  Eigen::MatrixXd sigma_hat;
  Eigen::VectorXd gradient;
  /// gradient' * sigma_hat * gradient: asymptotic variance of sqrt(n) (g1 - g2).
  double comparison_variance = 0.0;

  [[nodiscard]] double delta_hat() const { return summary_1.gini_index - summary_2.gini_index; }
  [[nodiscard]] std::size_t n() const { return summary_1.n; }
};

/// Requires at least 10 samples and two non-empty children for both rules
/// (DegenerateSplitError otherwise).
SplitComparisonStats compare_splits(std::span<const SoftLabeledSample> samples,
                                    const SplitRule& rule_1, const SplitRule& rule_2,
                                    GradientForm form = GradientForm::DeltaMethod);

struct TestOutcome {
  double delta_hat = 0.0;
  double p_value = 0.5;
  std::size_t n_used = 0;
};

/// Probability that an independent pseudo sample of the same size reverses
/// the ranking of two splits, given delta_hat = g1 - g2 <= 0:
///   p = 1 - Phi(-delta_hat / sqrt(2 * variance / n)).
/// Throws ContractError when delta_hat > 0 (the caller orders the pair).
double better_split_pvalue(double delta_hat, double comparison_variance, std::size_t n);
TestOutcome better_split_pvalue(const SplitComparisonStats& stats);

/// Sample size at which a comparison observed with p-value p_n at size
/// current_n would reach alpha: ceil(current_n * (Z_alpha / Z_{p_n})^2).
/// Requires 0 < alpha < p_n < 0.5.
std::size_t required_sample_size(std::size_t current_n, double p_n, double alpha);

/// Bonferroni-sum bound min(1, sum p_i); 0 for an empty list.
double aggregate_pvalue(std::span<const double> pairwise_pvalues);

/// Benjamini-Hochberg step-up discarding against the current best. Rival
/// p-values (entry `best` is ignored) are sorted ascending; with i* the
/// largest rank satisfying p_(i) <= (i/t) q, the rivals ranked 1..i* are
/// significantly worse than the best and are discarded. Returns the surviving
/// candidate indices in ascending order; `best` always survives.
std::vector<std::size_t> prune_candidates(std::span<const double> pairwise_pvalues,
                                          std::size_t best, double q);

}  // namespace stabletree::splitstat
