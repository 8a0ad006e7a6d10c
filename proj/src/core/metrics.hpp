#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace avood {

struct ClassAccuracyRow {
  uint32_t class_id = 0;
  size_t n = 0;
  size_t correct = 0;
  double accuracy = 0.0;  // NaN when n == 0
};

struct PerClassAccuracy {
  double mean = 0.0;  // over classes with samples
  std::vector<ClassAccuracyRow> rows;
  std::vector<uint32_t> empty_classes;  // flagged, excluded from the mean
};

// Mean over classes of within-class accuracy (not overall sample accuracy).
// Every label must belong to the class set; classes without samples are
// excluded from the mean and flagged.
PerClassAccuracy per_class_accuracy(std::span<const uint32_t> predictions,
                                    std::span<const uint32_t> labels,
                                    std::span<const uint32_t> class_ids);

// 2ab/(a+b); zero when either input is zero.
double harmonic_mean(double acc_seen, double acc_unseen);

// Mann-Whitney AUROC with 0.5 credit for ties; seen is the positive class.
// Computed by rank summation in O(n log n); the numerator is an exact integer
// so the result matches pairwise counting bit-for-bit.
double auroc(std::span<const double> seen_scores, std::span<const double> unseen_scores);

// Smallest FPR over thresholds (swept over score values, >= convention)
// achieving TPR >= tpr_target.
double fpr_at_tpr(std::span<const double> seen_scores, std::span<const double> unseen_scores,
                  double tpr_target = 0.95);

// Area under precision-recall (positive class = seen) via step-wise
// interpolation over all distinct thresholds.
double aupr(std::span<const double> seen_scores, std::span<const double> unseen_scores);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Stepwise ROC curve over all distinct thresholds, (0,0) to (1,1), collinear
// runs merged. Trapezoidal integration of the points reproduces auroc().
std::vector<RocPoint> roc_points(std::span<const double> seen_scores,
                                 std::span<const double> unseen_scores);

double trapezoid_area(std::span<const RocPoint> points);

}  // namespace avood
