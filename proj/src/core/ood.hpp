#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "eigen_sym.hpp"
#include "matrix.hpp"
#include "mlp.hpp"

namespace avood {

// Full spectrum of the training Gram matrix XᵀX, kept around so sweeps can
// re-slice bases for different principal dimensions from one decomposition.
struct SubspaceSpectrum {
  EigenResult eig;
  size_t dim = 0;
  bool centered = false;
  std::vector<double> mean;  // column means when centered, else zeros
};

// Residual basis O = eigenvector columns N+1..D. Columns are orthonormal.
struct SubspaceModel {
  Matrix residual_basis;          // D × (D−N)
  size_t principal_dim = 0;       // N
  std::vector<double> eigenvalues;  // full descending spectrum, for diagnostics
  bool centered = false;
  std::vector<double> mean;

  size_t dim() const { return residual_basis.rows(); }
};

// Eigendecomposition of XᵀX (no mean-centering unless asked; the centering
// flag is off by default and exists for experimentation only).
SubspaceSpectrum fit_spectrum(const Matrix& train_features, bool center = false);
SubspaceModel slice_subspace(const SubspaceSpectrum& spectrum, size_t principal_dim);
SubspaceModel fit_subspace(const Matrix& train_features, size_t principal_dim,
                           bool center = false);

// −‖Oᵀx‖₂; zero for vectors in the principal span, −‖x‖ for vectors fully in
// the residual span. Higher (closer to 0) means more in-distribution.
double residual_score(const SubspaceModel& model, std::span<const double> x);

// logsumexp(logits); higher for in-distribution samples.
double energy_score(std::span<const double> logits);

// Maximum softmax probability, in (0, 1]; shift-invariant baseline score.
double msp_score(std::span<const double> logits);

// energy + γ·residual.
double combined_score(double energy, double residual, double gamma);

// Linear-interpolated percentile of the training-seen combined scores.
// Default p = 5 targets 95% training-seen acceptance.
double calibrate_threshold(std::span<const double> train_seen_scores, double percentile);

enum class Verdict { seen, unseen };

// Seen iff s >= lambda (boundary inclusive).
Verdict detect(double score, double lambda);

struct ScoreBreakdown {
  double energy = 0.0;
  double residual = 0.0;
  double combined = 0.0;
};

struct DetectorConfig {
  double gamma = 0.0;
  uint32_t principal_dim = 0;
  double threshold = 0.0;
  double calibration_percentile = 5.0;
};

// Fitted subspace + calibrated threshold, tied to the MLP whose logits it
// scores via a content hash of that checkpoint.
struct Detector {
  SubspaceModel subspace;
  DetectorConfig config;
  uint64_t mlp_hash = 0;
};

ScoreBreakdown score_breakdown(const Detector& det, const MlpParams& mlp,
                               std::span<const double> x);

// Fits the subspace on the given training rows, scores them with the MLP's
// logits, and calibrates the threshold at the given percentile.
Detector fit_detector(const Matrix& train_features, const MlpParams& mlp, size_t principal_dim,
                      double gamma, double percentile, bool center = false);

// Same, but re-slices an existing spectrum instead of decomposing again
// (sweeps and the pipeline share one decomposition).
Detector make_detector(const SubspaceSpectrum& spectrum, const Matrix& train_features,
                       const MlpParams& mlp, size_t principal_dim, double gamma,
                       double percentile);

uint64_t mlp_content_hash(const MlpParams& mlp);

// "AVOOD1" detector bundle. Round-trips bit-exactly. On load, when the caller
// passes the MLP it intends to use, a hash mismatch is reported through
// *hash_mismatch (a warning condition, not an error).
void save_detector(std::ostream& out, const Detector& det);
Detector load_detector(std::istream& in, const std::string& label = "AVOOD1");
void save_detector(const std::string& path, const Detector& det);
Detector load_detector_file(const std::string& path, const MlpParams* expected_mlp = nullptr,
                            bool* hash_mismatch = nullptr);

}  // namespace avood
