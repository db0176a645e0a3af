#include "stabletree/splitstat/candidate_scan.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "stabletree/error.hpp"
#include "stabletree/splitstat/splitstat.hpp"

namespace stabletree::splitstat {

namespace {

using core::LabeledBatch;
using core::SplitRule;

struct ColumnGroup {
  std::size_t column = 0;
  std::vector<std::size_t> members;  // candidate indices, ascending threshold
};

std::vector<std::size_t> sorted_order(const LabeledBatch& pool, std::size_t column) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = pool.x(a, column), vb = pool.x(b, column);
    return va < vb || (va == vb && a < b);
  });
  return order;
}

bool same_partition(const LabeledBatch& pool, const SplitRule& a, const SplitRule& b) {
  for (std::size_t i = 0; i < pool.size(); ++i)
    if ((pool.x(i, a.column) <= a.threshold) != (pool.x(i, b.column) <= b.threshold)) return false;
  return true;
}

}  // namespace

ScanResult scan_candidates(const LabeledBatch& pool, std::span<const SplitRule> rules,
                           std::span<const char> active, bool with_tests) {
  if (rules.size() != active.size()) throw ContractError("scan_candidates: mask length mismatch");
  if (!std::is_sorted(rules.begin(), rules.end()))
    throw ContractError("scan_candidates: rules must be sorted by (column, threshold)");
  const std::size_t n = pool.size();
  const std::size_t k = pool.y.cols;
  const double nd = static_cast<double>(n);

  ScanResult result;
  result.n = n;
  result.candidates.resize(rules.size());
  if (n == 0) return result;

  std::vector<ColumnGroup> groups;
  for (std::size_t c = 0; c < rules.size(); ++c) {
    if (!active[c]) continue;
    result.candidates[c].active = true;
    if (groups.empty() || groups.back().column != rules[c].column)
      groups.push_back({rules[c].column, {}});
    groups.back().members.push_back(c);
  }

  std::vector<double> total(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) total[j] += pool.y(i, j);

  // Pass 1: child sums and Gini index.
  std::vector<double> left_sums(rules.size() * k, 0.0);
  std::vector<std::vector<std::size_t>> orders(groups.size());
  std::vector<double> sum_l(k), sum_r(k);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    orders[g] = sorted_order(pool, group.column);
    const auto& order = orders[g];
    std::fill(sum_l.begin(), sum_l.end(), 0.0);
    std::size_t pos = 0;
    std::optional<std::size_t> previous;
    for (std::size_t c : group.members) {
      const double t = rules[c].threshold;
      while (pos < n && pool.x(order[pos], group.column) <= t) {
        for (std::size_t j = 0; j < k; ++j) sum_l[j] += pool.y(order[pos], j);
        ++pos;
      }
      auto& eval = result.candidates[c];
      eval.n_left = pos;
      std::copy(sum_l.begin(), sum_l.end(), left_sums.begin() + static_cast<std::ptrdiff_t>(c * k));
      eval.degenerate = pos == 0 || pos == n;
      if (previous && result.candidates[*previous].n_left == pos)
        eval.duplicate_of = result.candidates[*previous].duplicate_of.value_or(*previous);
      previous = c;
      for (std::size_t j = 0; j < k; ++j) sum_r[j] = total[j] - sum_l[j];
      eval.gini_index = children_gini(static_cast<double>(pos), sum_l, nd - static_cast<double>(pos), sum_r);
    }
  }

  // Identical partitions across columns: equal left counts and label sums,
  // confirmed by an exact membership check.
  std::map<std::size_t, std::vector<std::size_t>> by_count;
  for (std::size_t c = 0; c < rules.size(); ++c) {
    auto& eval = result.candidates[c];
    if (!eval.active || eval.degenerate || eval.duplicate_of) continue;
    auto& bucket = by_count[eval.n_left];
    for (std::size_t other : bucket) {
      if (rules[other].column == rules[c].column) continue;
      bool close = true;
      for (std::size_t j = 0; j < k && close; ++j)
        close = std::abs(left_sums[other * k + j] - left_sums[c * k + j]) <= 1e-9 * (1.0 + nd);
      if (close && same_partition(pool, rules[other], rules[c])) {
        eval.duplicate_of = other;
        break;
      }
    }
    if (!eval.duplicate_of) bucket.push_back(c);
  }

  for (std::size_t c = 0; c < rules.size(); ++c) {
    const auto& eval = result.candidates[c];
    if (!eval.testable()) continue;
    if (!result.best || eval.gini_index < result.candidates[*result.best].gini_index) result.best = c;
  }
  if (!with_tests || !result.best) return result;

  // Influence of each sample on the best split's index:
  // psi(i) = |theta_q|^2 - 2 theta_q . y_i for the child q holding sample i.
  const std::size_t best = *result.best;
  const SplitRule& best_rule = rules[best];
  const double nl_best = static_cast<double>(result.candidates[best].n_left);
  std::vector<double> theta_bl(k), theta_br(k);
  double sq_bl = 0.0, sq_br = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    theta_bl[j] = left_sums[best * k + j] / nl_best;
    theta_br[j] = (total[j] - left_sums[best * k + j]) / (nd - nl_best);
    sq_bl += theta_bl[j] * theta_bl[j];
    sq_br += theta_br[j] * theta_br[j];
  }
  std::vector<double> psi(n);
  double psi_mean = 0.0, psi_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = pool.x(i, best_rule.column) <= best_rule.threshold;
    const auto& theta = left ? theta_bl : theta_br;
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += theta[j] * pool.y(i, j);
    psi[i] = (left ? sq_bl : sq_br) - 2.0 * dot;
    psi_mean += psi[i];
    psi_sq += psi[i] * psi[i];
  }
  psi_mean /= nd;
  const double psi_var = psi_sq / nd - psi_mean * psi_mean;

  // Totals for the complement (right child) sums.
  std::vector<double> m_total(k * k, 0.0), w_total(k, 0.0);
  double psi_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      w_total[a] += psi[i] * pool.y(i, a);
      for (std::size_t b = 0; b < k; ++b) m_total[a * k + b] += pool.y(i, a) * pool.y(i, b);
    }
    psi_total += psi[i];
  }

  std::vector<double> m_l(k * k), w_l(k), m_r(k * k), w_r(k), s_r(k);
  std::vector<double> coef(k);
  // Second moment and cross moment of one child's influence values
  // psi_c(i) = a . y_i + b with a = -2 theta, b = |theta|^2.
  auto child_terms = [&](double count, std::span<const double> sums, std::span<const double> m,
                         std::span<const double> w, double psi_sum, double& second, double& cross) {
    if (count <= 0) return;
    double b = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double theta = sums[j] / count;
      coef[j] = -2.0 * theta;
      b += theta * theta;
    }
    double quad = 0.0, lin = 0.0, wdot = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      lin += coef[a] * sums[a];
      wdot += coef[a] * w[a];
      for (std::size_t c2 = 0; c2 < k; ++c2) quad += coef[a] * m[a * k + c2] * coef[c2];
    }
    second += quad + 2.0 * b * lin + count * b * b;
    cross += wdot + b * psi_sum;
  };

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    const auto& order = orders[g];
    std::fill(m_l.begin(), m_l.end(), 0.0);
    std::fill(w_l.begin(), w_l.end(), 0.0);
    double psi_l = 0.0;
    std::size_t pos = 0;
    for (std::size_t c : group.members) {
      auto& eval = result.candidates[c];
      const double t = rules[c].threshold;
      while (pos < n && pool.x(order[pos], group.column) <= t) {
        const std::size_t i = order[pos];
        for (std::size_t a = 0; a < k; ++a) {
          w_l[a] += psi[i] * pool.y(i, a);
          for (std::size_t b = 0; b < k; ++b) m_l[a * k + b] += pool.y(i, a) * pool.y(i, b);
        }
        psi_l += psi[i];
        ++pos;
      }
      if (!eval.testable()) continue;
      if (c == best) {
        eval.comparison_variance = 0.0;
        eval.p_value = 0.5;
        continue;
      }
      const double nl = static_cast<double>(eval.n_left);
      const std::span<const double> s_l(left_sums.data() + c * k, k);
      for (std::size_t j = 0; j < k; ++j) {
        s_r[j] = total[j] - s_l[j];
        w_r[j] = w_total[j] - w_l[j];
      }
      for (std::size_t j = 0; j < k * k; ++j) m_r[j] = m_total[j] - m_l[j];
      double second = 0.0, cross = 0.0;
      child_terms(nl, s_l, m_l, w_l, psi_l, second, cross);
      child_terms(nd - nl, s_r, m_r, w_r, psi_total - psi_l, second, cross);
      const double mean_c = eval.gini_index - 1.0;
      const double var_c = second / nd - mean_c * mean_c;
      const double cov = cross / nd - psi_mean * mean_c;
      eval.comparison_variance = std::max(0.0, psi_var + var_c - 2.0 * cov);
      const double delta = std::min(0.0, result.candidates[best].gini_index - eval.gini_index);
      eval.p_value = better_split_pvalue(delta, eval.comparison_variance, n);
    }
  }
  return result;
}

}  // namespace stabletree::splitstat
