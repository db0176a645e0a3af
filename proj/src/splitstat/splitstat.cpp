#include "stabletree/splitstat/splitstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "stabletree/error.hpp"

namespace stabletree::splitstat {

namespace {
const boost::math::normal kStdNormal;
}

double normal_cdf(double z) { return boost::math::cdf(kStdNormal, z); }

double upper_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("upper_quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::complement(kStdNormal, p));
}

double gini_gain_distribution(std::span<const double> class_probs) {
  double sq = 0.0;
  for (double p : class_probs) {
    if (p < 0.0) throw ContractError("class probability is negative");
    sq += p * p;
  }
  return 1.0 - sq;
}

double children_gini(double n_left, std::span<const double> sum_left, double n_right,
                     std::span<const double> sum_right) {
  const double n = n_left + n_right;
  double purity = 0.0;
  if (n_left > 0) {
    double sq = 0.0;
    for (double s : sum_left) sq += s * s;
    purity += sq / n_left;
  }
  if (n_right > 0) {
    double sq = 0.0;
    for (double s : sum_right) sq += s * s;
    purity += sq / n_right;
  }
  return 1.0 - purity / n;
}

GiniSummary split_gini_index(std::span<const SoftLabeledSample> samples, const SplitRule& rule) {
  if (samples.empty()) throw ContractError("split_gini_index needs at least one sample");
  const std::size_t k = samples.front().y.size();
  GiniSummary s;
  s.n = samples.size();
  std::vector<double> sum_l(k, 0.0), sum_r(k, 0.0);
  for (const auto& sample : samples) {
    const bool left = core::route(rule, sample.x) == core::Side::Left;
    auto& target = left ? sum_l : sum_r;
    (left ? s.n_left : s.n_right) += 1;
    for (std::size_t j = 0; j < k; ++j) target[j] += sample.y[j];
  }
  s.theta_left.assign(k, 0.0);
  s.theta_right.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (s.n_left) s.theta_left[j] = sum_l[j] / static_cast<double>(s.n_left);
    if (s.n_right) s.theta_right[j] = sum_r[j] / static_cast<double>(s.n_right);
  }
  s.gini_index = children_gini(static_cast<double>(s.n_left), sum_l,
                               static_cast<double>(s.n_right), sum_r);
  return s;
}

SplitComparisonStats compare_splits(std::span<const SoftLabeledSample> samples,
                                    const SplitRule& rule_1, const SplitRule& rule_2,
                                    GradientForm form) {
  if (samples.size() < 10) throw ContractError("compare_splits needs at least 10 samples");
  SplitComparisonStats out;
  out.summary_1 = split_gini_index(samples, rule_1);
  out.summary_2 = split_gini_index(samples, rule_2);
  for (const auto* s : {&out.summary_1, &out.summary_2})
    if (s->n_left == 0 || s->n_right == 0)
      throw DegenerateSplitError("compare_splits: a rule leaves one child empty");

  const std::size_t k = samples.front().y.size();
  const std::size_t dim = 4 * k;
  const double n = static_cast<double>(samples.size());

  // Stacked per-sample vector and its covariance (denominator n).
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                 static_cast<Eigen::Index>(dim));
  Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
  for (const auto& sample : samples) {
    z.setZero();
    const std::size_t b1 = core::route(rule_1, sample.x) == core::Side::Left ? 0 : k;
    const std::size_t b2 = core::route(rule_2, sample.x) == core::Side::Left ? 2 * k : 3 * k;
    for (std::size_t j = 0; j < k; ++j) {
      z(static_cast<Eigen::Index>(b1 + j)) = sample.y[j];
      z(static_cast<Eigen::Index>(b2 + j)) = sample.y[j];
    }
    mean += z;
    second.selfadjointView<Eigen::Lower>().rankUpdate(z);
  }
  mean /= n;
  second = second.selfadjointView<Eigen::Lower>();
  out.sigma_hat = second / n - mean * mean.transpose();

  const std::vector<double>* thetas[4] = {&out.summary_1.theta_left, &out.summary_1.theta_right,
                                          &out.summary_2.theta_left, &out.summary_2.theta_right};
  const double props[4] = {out.summary_1.n_left / n, out.summary_1.n_right / n,
                           out.summary_2.n_left / n, out.summary_2.n_right / n};
  out.gradient.resize(static_cast<Eigen::Index>(dim));
  for (std::size_t block = 0; block < 4; ++block) {
    const auto& theta = *thetas[block];
    const double sign = block < 2 ? -1.0 : 1.0;
    double sq = 0.0;
    for (double t : theta) sq += t * t;
    for (std::size_t j = 0; j < k; ++j) {
      double g = 0.0;
      switch (form) {
        case GradientForm::DeltaMethod: g = 2.0 * theta[j] - sq; break;
        case GradientForm::ProportionFixed: g = 2.0 * theta[j]; break;
        case GradientForm::Literal: g = 2.0 * props[block] * theta[j]; break;
      }
      out.gradient(static_cast<Eigen::Index>(block * k + j)) = sign * g;
    }
  }
  out.comparison_variance = std::max(0.0, out.gradient.dot(out.sigma_hat * out.gradient));
  return out;
}

double better_split_pvalue(double delta_hat, double comparison_variance, std::size_t n) {
  if (delta_hat > 0.0)
    throw ContractError("better_split_pvalue: delta_hat > 0; order the pair so the first split is better");
  if (comparison_variance < 0.0 || std::isnan(comparison_variance))
    throw ContractError("better_split_pvalue: negative comparison variance");
  if (n == 0) throw ContractError("better_split_pvalue: n = 0");
  if (comparison_variance == 0.0) return delta_hat < 0.0 ? 0.0 : 0.5;
  const double scale = std::sqrt(2.0 * comparison_variance / static_cast<double>(n));
  return boost::math::cdf(boost::math::complement(kStdNormal, -delta_hat / scale));
}

TestOutcome better_split_pvalue(const SplitComparisonStats& stats) {
  return TestOutcome{stats.delta_hat(),
                     better_split_pvalue(stats.delta_hat(), stats.comparison_variance, stats.n()),
                     stats.n()};
}

std::size_t required_sample_size(std::size_t current_n, double p_n, double alpha) {
  if (current_n == 0) throw ContractError("required_sample_size: current_n = 0");
  if (!(alpha > 0.0 && alpha < p_n))
    throw ContractError("required_sample_size: needs 0 < alpha < p_n");
  if (!(p_n < 0.5))
    throw ContractError("required_sample_size: p_n >= 0.5 has no finite answer; apply the growth cap");
  const double ratio = upper_quantile(alpha) / upper_quantile(p_n);
  const double target = std::ceil(static_cast<double>(current_n) * ratio * ratio);
  if (!(target < 1e18)) return static_cast<std::size_t>(1e18);
  return std::max(current_n + 1, static_cast<std::size_t>(target));
}

double aggregate_pvalue(std::span<const double> pairwise_pvalues) {
  double sum = 0.0;
  for (double p : pairwise_pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("aggregate_pvalue: p-value outside [0, 1]");
    sum += p;
  }
  return std::min(1.0, sum);
}

std::vector<std::size_t> prune_candidates(std::span<const double> pairwise_pvalues,
                                          std::size_t best, double q) {
  std::vector<std::size_t> rivals;
  for (std::size_t i = 0; i < pairwise_pvalues.size(); ++i)
    if (i != best) rivals.push_back(i);
  std::stable_sort(rivals.begin(), rivals.end(), [&](std::size_t a, std::size_t b) {
    return pairwise_pvalues[a] < pairwise_pvalues[b];
  });
  const double t = static_cast<double>(rivals.size());
  std::size_t cutoff = 0;  // number of rivals discarded
  for (std::size_t rank = rivals.size(); rank >= 1; --rank) {
    if (pairwise_pvalues[rivals[rank - 1]] <= static_cast<double>(rank) / t * q) {
      cutoff = rank;
      break;
    }
  }
  std::vector<std::size_t> survivors(rivals.begin() + static_cast<std::ptrdiff_t>(cutoff), rivals.end());
  if (best < pairwise_pvalues.size()) survivors.push_back(best);
  std::sort(survivors.begin(), survivors.end());
  return survivors;
}

}  // namespace stabletree::splitstat
