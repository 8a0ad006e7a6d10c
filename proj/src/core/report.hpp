#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metrics.hpp"

namespace avood {

// Routing confusion over the test set (true class side × detector verdict).
struct RoutingCounts {
  size_t seen_as_seen = 0;
  size_t seen_as_unseen = 0;
  size_t unseen_as_seen = 0;
  size_t unseen_as_unseen = 0;

  size_t total() const {
    return seen_as_seen + seen_as_unseen + unseen_as_seen + unseen_as_unseen;
  }
};

struct PerClassReportRow {
  uint32_t class_id = 0;
  std::string class_name;
  bool seen = false;
  size_t n = 0;
  size_t correct = 0;
  double accuracy = 0.0;
};

struct GzslReport {
  double acc_seen = 0.0;
  double acc_unseen = 0.0;
  double harmonic = 0.0;
  std::optional<double> acc_zsl;
  std::vector<PerClassReportRow> per_class;
  RoutingCounts routing;
};

struct OodReport {
  double auroc = 0.0;
  double fpr95 = 0.0;
  double aupr = 0.0;
  std::vector<RocPoint> roc;
};

// metric,value rows; percentages rendered in [0,1] at full precision.
std::string metrics_csv(const GzslReport& gzsl, const OodReport* ood);
// class_id,class_name,seen,n,correct,accuracy rows.
std::string per_class_csv(const GzslReport& gzsl);
// One JSON object per line: metrics, then per-class rows, then routing.
std::string report_jsonl(const GzslReport& gzsl, const OodReport* ood);
// fpr,tpr rows for external plotting.
std::string roc_csv(const OodReport& ood);
// Human-readable summary with percentages at 2 decimals.
std::string summary_text(const GzslReport& gzsl, const OodReport* ood);

}  // namespace avood
