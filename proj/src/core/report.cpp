#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace avood {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

}  // namespace

namespace {
// A report with no routing activity but an acc_ZSL value came from a
// ZSL-only run; the GZSL metrics are not meaningful there.
bool gzsl_evaluated(const GzslReport& gzsl) {
  return gzsl.routing.total() > 0 || !gzsl.acc_zsl.has_value();
}
}  // namespace

std::string metrics_csv(const GzslReport& gzsl, const OodReport* ood) {
  std::ostringstream out;
  out << "metric,value\n";
  if (gzsl_evaluated(gzsl)) {
    out << "acc_S," << fmt(gzsl.acc_seen) << "\n";
    out << "acc_U," << fmt(gzsl.acc_unseen) << "\n";
    out << "H," << fmt(gzsl.harmonic) << "\n";
  }
  if (gzsl.acc_zsl) out << "acc_ZSL," << fmt(*gzsl.acc_zsl) << "\n";
  if (ood != nullptr) {
    out << "auroc," << fmt(ood->auroc) << "\n";
    out << "fpr95," << fmt(ood->fpr95) << "\n";
    out << "aupr," << fmt(ood->aupr) << "\n";
  }
  if (gzsl_evaluated(gzsl)) {
    out << "route_seen_as_seen," << gzsl.routing.seen_as_seen << "\n";
    out << "route_seen_as_unseen," << gzsl.routing.seen_as_unseen << "\n";
    out << "route_unseen_as_seen," << gzsl.routing.unseen_as_seen << "\n";
    out << "route_unseen_as_unseen," << gzsl.routing.unseen_as_unseen << "\n";
  }
  return out.str();
}

std::string per_class_csv(const GzslReport& gzsl) {
  std::ostringstream out;
  out << "class_id,class_name,seen,n,correct,accuracy\n";
  for (const auto& row : gzsl.per_class) {
    out << row.class_id << ',' << row.class_name << ',' << (row.seen ? 1 : 0) << ',' << row.n
        << ',' << row.correct << ',' << fmt(row.accuracy) << "\n";
  }
  return out.str();
}

std::string report_jsonl(const GzslReport& gzsl, const OodReport* ood) {
  std::ostringstream out;
  auto metric = [&out](const char* name, double value) {
    nlohmann::ordered_json j;
    j["metric"] = name;
    j["value"] = value;
    out << j.dump() << "\n";
  };
  if (gzsl_evaluated(gzsl)) {
    metric("acc_S", gzsl.acc_seen);
    metric("acc_U", gzsl.acc_unseen);
    metric("H", gzsl.harmonic);
  }
  if (gzsl.acc_zsl) metric("acc_ZSL", *gzsl.acc_zsl);
  if (ood != nullptr) {
    metric("auroc", ood->auroc);
    metric("fpr95", ood->fpr95);
    metric("aupr", ood->aupr);
  }
  for (const auto& row : gzsl.per_class) {
    nlohmann::ordered_json j;
    j["class_id"] = row.class_id;
    j["class_name"] = row.class_name;
    j["seen"] = row.seen;
    j["n"] = row.n;
    j["correct"] = row.correct;
    j["accuracy"] = row.accuracy;
    out << j.dump() << "\n";
  }
  if (gzsl_evaluated(gzsl)) {
    nlohmann::ordered_json j;
    j["routing"] = {{"seen_as_seen", gzsl.routing.seen_as_seen},
                    {"seen_as_unseen", gzsl.routing.seen_as_unseen},
                    {"unseen_as_seen", gzsl.routing.unseen_as_seen},
                    {"unseen_as_unseen", gzsl.routing.unseen_as_unseen}};
    out << j.dump() << "\n";
  }
  return out.str();
}

std::string roc_csv(const OodReport& ood) {
  std::ostringstream out;
  out << "fpr,tpr\n";
  for (const auto& p : ood.roc) out << fmt(p.fpr) << ',' << fmt(p.tpr) << "\n";
  return out.str();
}

std::string summary_text(const GzslReport& gzsl, const OodReport* ood) {
  std::ostringstream out;
  if (gzsl_evaluated(gzsl)) {
    out << "acc_S   " << pct(gzsl.acc_seen) << "%\n";
    out << "acc_U   " << pct(gzsl.acc_unseen) << "%\n";
    out << "H       " << pct(gzsl.harmonic) << "%\n";
  }
  if (gzsl.acc_zsl) out << "acc_ZSL " << pct(*gzsl.acc_zsl) << "%\n";
  if (ood != nullptr) {
    out << "AUROC   " << pct(ood->auroc) << "%\n";
    out << "FPR95   " << pct(ood->fpr95) << "%\n";
    out << "AUPR    " << pct(ood->aupr) << "%\n";
  }
  if (gzsl_evaluated(gzsl)) {
    const RoutingCounts& r = gzsl.routing;
    out << "routing seen->seen " << r.seen_as_seen << ", seen->unseen " << r.seen_as_unseen
        << ", unseen->seen " << r.unseen_as_seen << ", unseen->unseen " << r.unseen_as_unseen
        << "\n";
  }
  return out.str();
}

}  // namespace avood
