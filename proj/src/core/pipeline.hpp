#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aligner.hpp"
#include "dataset.hpp"
#include "expert.hpp"
#include "mlp.hpp"
#include "ood.hpp"
#include "report.hpp"

namespace avood {

// Detector knobs before resolution. gamma < 0 requests the automatic
// gamma sweep (argmax AUROC over {0} ∪ default grid on evaluation scores,
// mirroring the per-dataset tuning of the reference setup); principal_dim 0
// requests min(64, D/4).
struct DetectorSettings {
  double gamma = -1.0;
  uint32_t principal_dim = 0;
  double percentile = 5.0;
  bool center = false;
};

enum class PipelineMode { zsl, gzsl };

struct PipelineConfig {
  std::optional<SynthConfig> synth;  // generate when set, load otherwise
  std::string dataset_path;
  bool l2_normalize = false;
  TrainConfig seen_cfg;
  AlignerConfig unseen_cfg;
  DetectorSettings detector;
  std::string unseen_expert = "aligner";
  PipelineMode mode = PipelineMode::gzsl;
  // Single source of randomness: stage seeds derive as seed, seed+1, seed+2
  // (generator, seen expert, unseen expert).
  uint64_t seed = 42;
};

// The paper-reported sweep grid; sweeps always prepend gamma = 0 so the
// energy-only endpoint is exact.
std::vector<double> default_gamma_grid();

// Trained seen expert plus per-test-sample score components over one
// dataset; sweeps re-weight these without retraining anything.
struct ScoredStack {
  GeneratedData data;
  bool generated = false;
  SplitViews views;
  MlpParams mlp;
  std::vector<double> seen_epoch_loss;
  Matrix train_features;  // train-seen rows, in view order
  SubspaceSpectrum spectrum;
  uint32_t principal_dim = 0;
  std::vector<double> test_seen_energy, test_seen_residual;
  std::vector<double> test_unseen_energy, test_unseen_residual;
};

ScoredStack prepare_stack(const PipelineConfig& cfg);

// Builds the stack on an already-materialized dataset (the C API path).
ScoredStack prepare_stack_on(GeneratedData data, const TrainConfig& seen_cfg,
                             const DetectorSettings& det, uint64_t seed);

// det.gamma when fixed; otherwise argmax AUROC over {0} ∪ default grid
// (ties keep the smaller gamma).
double resolve_gamma(const ScoredStack& stack, const DetectorSettings& det);

struct EvalResult {
  GzslReport gzsl;
  OodReport ood;
};

// Routes every test sample through exactly one expert (seen classes for the
// MLP, unseen classes for the unseen expert) and computes all metrics. The
// canonical evaluation used by run_gzsl and by the C API's artifact-level
// entry point.
EvalResult evaluate_gzsl(const Dataset& ds, const MlpParams& mlp, const Detector& det,
                         const UnseenExpert& expert);

// acc_ZSL only: expert over unseen test samples, candidates restricted to
// unseen classes.
GzslReport evaluate_zsl(const Dataset& ds, const UnseenExpert& expert);

struct RunArtifacts {
  GeneratedData data;
  bool generated = false;
  MlpParams mlp;
  std::optional<AlignerParams> aligner;
  Detector detector;
  GzslReport gzsl;
  OodReport ood;
  std::vector<double> seen_epoch_loss;
  std::vector<double> unseen_epoch_loss;
  std::string provenance_json;
};

// Full four-box flow: train the seen expert, fit and calibrate the detector,
// train the unseen expert, route every test sample through exactly one
// expert, and evaluate. Deterministic given (config, seed).
RunArtifacts run_gzsl(const PipelineConfig& cfg);

struct ZslArtifacts {
  GeneratedData data;
  bool generated = false;
  std::optional<AlignerParams> aligner;
  GzslReport report;  // acc_zsl only
  std::vector<double> unseen_epoch_loss;
  std::string provenance_json;
};

// Unseen expert over unseen test samples with candidates restricted to the
// unseen classes; no detector involved.
ZslArtifacts run_zsl(const PipelineConfig& cfg);

struct GammaRow {
  double gamma = 0.0;
  double auroc_combined = 0.0;
};

struct DimRow {
  uint32_t principal_dim = 0;
  double auroc_combined = 0.0;
  std::string error;  // non-empty when this grid entry was rejected
};

// AUROC per gamma with everything else held fixed; the stack is built once.
std::vector<GammaRow> sweep_gamma(const ScoredStack& stack, std::vector<double> grid);
std::vector<GammaRow> sweep_gamma(const PipelineConfig& cfg, const std::vector<double>& grid);

// AUROC per principal dimension, re-slicing one decomposition. Out-of-range
// entries produce per-row errors; the sweep continues.
std::vector<DimRow> sweep_dim(const ScoredStack& stack, double gamma,
                              const std::vector<uint32_t>& grid);
std::vector<DimRow> sweep_dim(const PipelineConfig& cfg, const std::vector<uint32_t>& grid);

std::string gamma_table_csv(const std::vector<GammaRow>& rows);
std::string dim_table_csv(const std::vector<DimRow>& rows);

// Writes reports, checkpoints and provenance under `dir` (created if needed):
// dataset.avf (generated runs), seen_mlp.avmlp, aligner.avaln, detector.avood,
// metrics.csv, per_class.csv, report.jsonl, roc.csv, provenance.json.
void write_artifacts(const RunArtifacts& artifacts, const std::string& dir);
void write_artifacts(const ZslArtifacts& artifacts, const std::string& dir);

}  // namespace avood
