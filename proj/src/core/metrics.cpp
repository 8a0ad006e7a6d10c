#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "errors.hpp"
#include "matrix.hpp"

namespace avood {

namespace {

void check_scores(std::span<const double> seen, std::span<const double> unseen,
                  const char* who) {
  if (seen.empty() || unseen.empty())
    throw ValidationError(std::string(who) + ": both score sets must be non-empty");
  if (!all_finite(seen) || !all_finite(unseen))
    throw ValidationError(std::string(who) + ": non-finite score");
}

// (score, is_seen) pairs sorted by descending score.
std::vector<std::pair<double, bool>> tagged_descending(std::span<const double> seen,
                                                       std::span<const double> unseen) {
  std::vector<std::pair<double, bool>> v;
  v.reserve(seen.size() + unseen.size());
  for (double s : seen) v.emplace_back(s, true);
  for (double s : unseen) v.emplace_back(s, false);
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  return v;
}

}  // namespace

PerClassAccuracy per_class_accuracy(std::span<const uint32_t> predictions,
                                    std::span<const uint32_t> labels,
                                    std::span<const uint32_t> class_ids) {
  if (class_ids.empty()) throw ValidationError("per_class_accuracy: empty class set");
  if (predictions.size() != labels.size())
    throw ValidationError("per_class_accuracy: prediction/label count mismatch");
  std::unordered_map<uint32_t, size_t> slot;
  for (size_t i = 0; i < class_ids.size(); ++i) slot.emplace(class_ids[i], i);
  std::vector<size_t> n(class_ids.size(), 0), correct(class_ids.size(), 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    const auto it = slot.find(labels[i]);
    if (it == slot.end())
      throw ValidationError("per_class_accuracy: label outside the class set");
    ++n[it->second];
    if (predictions[i] == labels[i]) ++correct[it->second];
  }

  PerClassAccuracy out;
  double sum = 0.0;
  size_t populated = 0;
  for (size_t k = 0; k < class_ids.size(); ++k) {
    ClassAccuracyRow row;
    row.class_id = class_ids[k];
    row.n = n[k];
    row.correct = correct[k];
    if (n[k] == 0) {
      row.accuracy = std::numeric_limits<double>::quiet_NaN();
      out.empty_classes.push_back(class_ids[k]);
    } else {
      row.accuracy = static_cast<double>(correct[k]) / static_cast<double>(n[k]);
      sum += row.accuracy;
      ++populated;
    }
    out.rows.push_back(row);
  }
  if (populated == 0)
    throw ValidationError("per_class_accuracy: no class in the set has samples");
  out.mean = sum / static_cast<double>(populated);
  return out;
}

double harmonic_mean(double acc_seen, double acc_unseen) {
  if (!(acc_seen >= 0.0 && acc_seen <= 1.0) || !(acc_unseen >= 0.0 && acc_unseen <= 1.0))
    throw ValidationError("harmonic_mean: accuracies must lie in [0, 1]");
  if (acc_seen == 0.0 || acc_unseen == 0.0) return 0.0;
  return 2.0 * acc_seen * acc_unseen / (acc_seen + acc_unseen);
}

double auroc(std::span<const double> seen, std::span<const double> unseen) {
  check_scores(seen, unseen, "auroc");
  std::vector<std::pair<double, bool>> v;
  v.reserve(seen.size() + unseen.size());
  for (double s : seen) v.emplace_back(s, true);
  for (double s : unseen) v.emplace_back(s, false);
  std::sort(v.begin(), v.end());

  // Twice the rank-sum of seen scores (average ranks on ties) is an exact
  // integer: a tie group spanning 1-based ranks [a, b] contributes a+b per
  // member.
  long long twice_ranksum = 0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    const long long a = static_cast<long long>(i) + 1;
    const long long b = static_cast<long long>(j);
    for (size_t k = i; k < j; ++k)
      if (v[k].second) twice_ranksum += a + b;
    i = j;
  }
  const long long ns = static_cast<long long>(seen.size());
  const long long nu = static_cast<long long>(unseen.size());
  const long long twice_numerator = twice_ranksum - ns * (ns + 1);
  return static_cast<double>(twice_numerator) / static_cast<double>(2 * ns * nu);
}

double fpr_at_tpr(std::span<const double> seen, std::span<const double> unseen,
                  double tpr_target) {
  check_scores(seen, unseen, "fpr_at_tpr");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0))
    throw ValidationError("fpr_at_tpr: target must lie in (0, 1]");
  const auto v = tagged_descending(seen, unseen);
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) {
      if (v[j].second) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(seen.size());
    if (tpr >= tpr_target)
      return static_cast<double>(fp) / static_cast<double>(unseen.size());
    i = j;
  }
  return 1.0;  // unreachable: tpr hits 1 at the last threshold
}

double aupr(std::span<const double> seen, std::span<const double> unseen) {
  check_scores(seen, unseen, "aupr");
  const auto v = tagged_descending(seen, unseen);
  double area = 0.0;
  double recall_prev = 0.0;
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) {
      if (v[j].second) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(seen.size());
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - recall_prev) * precision;
    recall_prev = recall;
    i = j;
  }
  return area;
}

std::vector<RocPoint> roc_points(std::span<const double> seen, std::span<const double> unseen) {
  check_scores(seen, unseen, "roc_points");
  const auto v = tagged_descending(seen, unseen);

  // Integer count vertices with collinear-run compression (exact arithmetic).
  std::vector<std::pair<long long, long long>> pts;  // (fp, tp)
  pts.emplace_back(0, 0);
  auto push = [&pts](long long fp, long long tp) {
    while (pts.size() >= 2) {
      const auto& a = pts[pts.size() - 2];
      const auto& b = pts[pts.size() - 1];
      const long long cross =
          (b.first - a.first) * (tp - b.second) - (b.second - a.second) * (fp - b.first);
      if (cross != 0) break;
      pts.pop_back();
    }
    pts.emplace_back(fp, tp);
  };
  long long tp = 0, fp = 0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) {
      if (v[j].second) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    push(fp, tp);
    i = j;
  }

  std::vector<RocPoint> out;
  out.reserve(pts.size());
  for (const auto& [f, t] : pts) {
    out.push_back({static_cast<double>(f) / static_cast<double>(unseen.size()),
                   static_cast<double>(t) / static_cast<double>(seen.size())});
  }
  return out;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (size_t k = 1; k < points.size(); ++k) {
    area += (points[k].fpr - points[k - 1].fpr) * (points[k].tpr + points[k - 1].tpr) * 0.5;
  }
  return area;
}

}  // namespace avood
