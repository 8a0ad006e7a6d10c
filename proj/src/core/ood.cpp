#include "ood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "errors.hpp"
#include "numerics.hpp"

namespace avood {

namespace {
constexpr char kMagic[6] = {'A', 'V', 'O', 'O', 'D', '1'};
}

SubspaceSpectrum fit_spectrum(const Matrix& train_features, bool center) {
  if (train_features.rows() < 2)
    throw ValidationError("fit_spectrum: need at least 2 training samples");
  const size_t d = train_features.cols();
  SubspaceSpectrum s;
  s.dim = d;
  s.centered = center;
  s.mean.assign(d, 0.0);

  Matrix x = train_features;
  if (center) {
    const double inv_m = 1.0 / static_cast<double>(x.rows());
    for (size_t i = 0; i < x.rows(); ++i)
      for (size_t j = 0; j < d; ++j) s.mean[j] += x(i, j) * inv_m;
    for (size_t i = 0; i < x.rows(); ++i)
      for (size_t j = 0; j < d; ++j) x(i, j) -= s.mean[j];
  }
  const Matrix g = gram(x);
  if (!g.all_finite()) throw NumericError("fit_spectrum: non-finite Gram entries");
  s.eig = sym_eig(g);
  return s;
}

SubspaceModel slice_subspace(const SubspaceSpectrum& spectrum, size_t principal_dim) {
  const size_t d = spectrum.dim;
  if (principal_dim < 1 || principal_dim >= d)
    throw ValidationError("slice_subspace: principal dim must satisfy 1 <= N < D");
  SubspaceModel m;
  m.principal_dim = principal_dim;
  m.eigenvalues = spectrum.eig.eigenvalues;
  m.centered = spectrum.centered;
  m.mean = spectrum.mean;
  m.residual_basis = Matrix(d, d - principal_dim);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = principal_dim; j < d; ++j)
      m.residual_basis(i, j - principal_dim) = spectrum.eig.eigenvectors(i, j);
  return m;
}

SubspaceModel fit_subspace(const Matrix& train_features, size_t principal_dim, bool center) {
  return slice_subspace(fit_spectrum(train_features, center), principal_dim);
}

double residual_score(const SubspaceModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw ValidationError("residual_score: dimension mismatch");
  double ss = 0.0;
  if (model.centered) {
    std::vector<double> shifted(x.begin(), x.end());
    for (size_t i = 0; i < shifted.size(); ++i) shifted[i] -= model.mean[i];
    const std::vector<double> proj = matvec_transposed(model.residual_basis, shifted);
    ss = dot(proj, proj);
  } else {
    const std::vector<double> proj = matvec_transposed(model.residual_basis, x);
    ss = dot(proj, proj);
  }
  return -std::sqrt(ss);
}

double energy_score(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("energy_score: empty logits");
  return logsumexp(logits);
}

double msp_score(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("msp_score: empty logits");
  const double lse = logsumexp(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  return std::exp(m - lse);
}

double combined_score(double energy, double residual, double gamma) {
  if (!std::isfinite(energy) || !std::isfinite(residual) || !std::isfinite(gamma))
    throw ValidationError("combined_score: non-finite argument");
  if (gamma < 0.0) throw ValidationError("combined_score: gamma must be >= 0");
  return energy + gamma * residual;
}

double calibrate_threshold(std::span<const double> train_seen_scores, double percentile) {
  if (train_seen_scores.empty()) throw ValidationError("calibrate_threshold: empty scores");
  if (!(percentile > 0.0 && percentile < 100.0))
    throw ValidationError("calibrate_threshold: percentile must lie in (0, 100)");
  if (!all_finite(train_seen_scores))
    throw NumericError("calibrate_threshold: non-finite score");
  std::vector<double> sorted(train_seen_scores.begin(), train_seen_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Verdict detect(double score, double lambda) {
  if (!std::isfinite(score) || !std::isfinite(lambda))
    throw ValidationError("detect: non-finite argument");
  return score >= lambda ? Verdict::seen : Verdict::unseen;
}

ScoreBreakdown score_breakdown(const Detector& det, const MlpParams& mlp,
                               std::span<const double> x) {
  ScoreBreakdown b;
  b.energy = energy_score(mlp_forward(mlp, x));
  b.residual = residual_score(det.subspace, x);
  b.combined = combined_score(b.energy, b.residual, det.config.gamma);
  return b;
}

uint64_t mlp_content_hash(const MlpParams& mlp) {
  std::ostringstream buf(std::ios::binary);
  save_mlp(buf, mlp);
  const std::string bytes = buf.str();
  return fnv1a(bytes.data(), bytes.size());
}

Detector make_detector(const SubspaceSpectrum& spectrum, const Matrix& train_features,
                       const MlpParams& mlp, size_t principal_dim, double gamma,
                       double percentile) {
  if (train_features.cols() != mlp.input_dim())
    throw ValidationError("fit_detector: feature dim disagrees with MLP input dim");
  Detector det;
  det.subspace = slice_subspace(spectrum, principal_dim);
  det.config.gamma = gamma;
  det.config.principal_dim = static_cast<uint32_t>(principal_dim);
  det.config.calibration_percentile = percentile;
  det.mlp_hash = mlp_content_hash(mlp);

  std::vector<double> scores(train_features.rows());
  for (size_t i = 0; i < train_features.rows(); ++i) {
    const ScoreBreakdown b = score_breakdown(det, mlp, train_features.row(i));
    scores[i] = b.combined;
  }
  det.config.threshold = calibrate_threshold(scores, percentile);
  return det;
}

Detector fit_detector(const Matrix& train_features, const MlpParams& mlp, size_t principal_dim,
                      double gamma, double percentile, bool center) {
  return make_detector(fit_spectrum(train_features, center), train_features, mlp, principal_dim,
                       gamma, percentile);
}

void save_detector(std::ostream& out, const Detector& det) {
  const SubspaceModel& m = det.subspace;
  if (m.dim() == 0) throw ValidationError("save_detector: empty model");
  LeWriter w(out);
  w.bytes(kMagic, 6);
  w.u32(static_cast<uint32_t>(m.dim()));
  w.u32(det.config.principal_dim);
  w.f64(det.config.gamma);
  w.f64(det.config.threshold);
  w.f64(det.config.calibration_percentile);
  w.u64(det.mlp_hash);
  w.u8(m.centered ? 1 : 0);
  w.f64_array(m.eigenvalues.data(), m.eigenvalues.size());
  w.f64_array(m.mean.data(), m.mean.size());
  w.f64_array(m.residual_basis.data(), m.residual_basis.size());
  if (!w.good()) throw DataError("save_detector: write failed");
}

Detector load_detector(std::istream& in, const std::string& label) {
  LeReader r(in, label);
  r.expect_magic(kMagic, 6);
  const uint32_t d = r.u32();
  const uint32_t n = r.u32();
  if (d == 0 || n < 1 || n >= d) throw FormatError(label + ": bad dims in header", 6);
  Detector det;
  det.config.principal_dim = n;
  det.config.gamma = r.f64();
  det.config.threshold = r.f64();
  det.config.calibration_percentile = r.f64();
  det.mlp_hash = r.u64();
  const uint8_t centered = r.u8();
  if (centered > 1) throw FormatError(label + ": bad centering flag", r.offset() - 1);
  det.subspace.centered = centered == 1;
  det.subspace.principal_dim = n;
  det.subspace.eigenvalues.resize(d);
  r.f64_array(det.subspace.eigenvalues.data(), d);
  det.subspace.mean.resize(d);
  r.f64_array(det.subspace.mean.data(), d);
  det.subspace.residual_basis = Matrix(d, d - n);
  r.f64_array(det.subspace.residual_basis.data(), det.subspace.residual_basis.size());
  r.expect_eof();
  if (!det.subspace.residual_basis.all_finite() || !all_finite(det.subspace.eigenvalues))
    throw DataError(label + ": non-finite payload");
  return det;
}

void save_detector(const std::string& path, const Detector& det) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_detector: cannot open " + path);
  save_detector(out, det);
}

Detector load_detector_file(const std::string& path, const MlpParams* expected_mlp,
                            bool* hash_mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_detector: cannot open " + path);
  Detector det = load_detector(in, path);
  if (hash_mismatch != nullptr) {
    *hash_mismatch =
        expected_mlp != nullptr && mlp_content_hash(*expected_mlp) != det.mlp_hash;
  }
  return det;
}

}  // namespace avood
