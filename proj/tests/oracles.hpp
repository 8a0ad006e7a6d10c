#pragma once

// Brute-force metric oracles used only by tests. These deliberately mirror
// the metric definitions with the most literal possible computation
// (quadratic pairwise counting, exhaustive threshold enumeration) and stay
// independent of the library's fast paths.

#include <algorithm>
#include <span>
#include <vector>

namespace avood::test_oracles {

// (#seen>unseen pairs + 0.5 ties) / (n_s * n_u), via exact integer counts.
inline double auroc_pairwise(std::span<const double> seen, std::span<const double> unseen) {
  long long greater = 0, ties = 0;
  for (double s : seen) {
    for (double u : unseen) {
      if (s > u) {
        ++greater;
      } else if (s == u) {
        ++ties;
      }
    }
  }
  const long long twice_numerator = 2 * greater + ties;
  const long long denom = 2 * static_cast<long long>(seen.size()) *
                          static_cast<long long>(unseen.size());
  return static_cast<double>(twice_numerator) / static_cast<double>(denom);
}

inline std::vector<double> distinct_thresholds_descending(std::span<const double> seen,
                                                          std::span<const double> unseen) {
  std::vector<double> all(seen.begin(), seen.end());
  all.insert(all.end(), unseen.begin(), unseen.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

// Smallest FPR over enumerated thresholds achieving TPR >= target
// (classification rule: seen iff score >= threshold).
inline double fpr_at_tpr_enumerated(std::span<const double> seen,
                                    std::span<const double> unseen, double target) {
  double best = 1.0;
  bool found = false;
  for (double lambda : distinct_thresholds_descending(seen, unseen)) {
    size_t tp = 0, fp = 0;
    for (double s : seen)
      if (s >= lambda) ++tp;
    for (double u : unseen)
      if (u >= lambda) ++fp;
    const double tpr = static_cast<double>(tp) / static_cast<double>(seen.size());
    if (tpr >= target) {
      const double fpr = static_cast<double>(fp) / static_cast<double>(unseen.size());
      if (!found || fpr < best) {
        best = fpr;
        found = true;
      }
    }
  }
  return best;
}

// Step-wise precision-recall area over enumerated thresholds.
inline double aupr_enumerated(std::span<const double> seen, std::span<const double> unseen) {
  double area = 0.0;
  double recall_prev = 0.0;
  for (double lambda : distinct_thresholds_descending(seen, unseen)) {
    size_t tp = 0, fp = 0;
    for (double s : seen)
      if (s >= lambda) ++tp;
    for (double u : unseen)
      if (u >= lambda) ++fp;
    const double recall = static_cast<double>(tp) / static_cast<double>(seen.size());
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - recall_prev) * precision;
    recall_prev = recall;
  }
  return area;
}

}  // namespace avood::test_oracles
