#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "matrix.hpp"
#include "mlp.hpp"

namespace avood {

struct AlignerConfig {
  uint32_t embed_dim = 512;  // encoder output width
  uint32_t proj_dim = 64;    // projection space where NN decoding happens
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint32_t batch_size = 64;
  uint32_t epochs = 50;
  uint64_t seed = 42;
  // Unit-normalize projections at prediction time. Training always uses the
  // plain dot-product similarity.
  bool normalize_projections = false;

  void validate() const;
  friend bool operator==(const AlignerConfig&, const AlignerConfig&) = default;
};

// Two-branch encoder/projector/decoder aligner. Encoders apply a rectifier;
// projectors and decoders are linear. Decoders map back to embed_dim so the
// reconstruction loss can compare against encoded text.
struct AlignerParams {
  AffineLayer sample_encoder;    // D   -> d_e
  AffineLayer text_encoder;      // D_t -> d_e
  AffineLayer sample_projector;  // d_e -> d_p
  AffineLayer text_projector;    // d_e -> d_p
  AffineLayer sample_decoder;    // d_p -> d_e
  AffineLayer text_decoder;      // d_p -> d_e
  AlignerConfig trained_with;

  size_t feature_dim() const { return sample_encoder.in_dim(); }
  size_t text_dim() const { return text_encoder.in_dim(); }
  size_t embed_dim() const { return sample_encoder.out_dim(); }
  size_t proj_dim() const { return sample_projector.out_dim(); }
  friend bool operator==(const AlignerParams&, const AlignerParams&) = default;
};

AlignerParams init_aligner(size_t feature_dim, size_t text_dim, const AlignerConfig& cfg);

// encoded = rectified encoder output, projected = projector output,
// reconstructed = decoder output.
struct EncodeOut {
  std::vector<double> encoded;
  std::vector<double> projected;
  std::vector<double> reconstructed;
};

EncodeOut encode_sample(const AlignerParams& params, std::span<const double> x);
EncodeOut encode_text(const AlignerParams& params, std::span<const double> t);

// Mean over the batch of −log softmax over dot products of each sample
// projection with all seen-class text projections, at the true class.
double loss_xe(const Matrix& theta_o, const Matrix& theta_w_table,
               std::span<const uint32_t> labels);

// Mean over the batch of mse(ρ_o, w) + mse(ρ_w, w); rows are per-sample, the
// squared error averages over coordinates.
double loss_rec(const Matrix& rho_o, const Matrix& rho_w, const Matrix& w);

// Mean over the batch of mse(θ_o, θ_w).
double loss_reg(const Matrix& theta_o, const Matrix& theta_w);

struct AlignerLossTerms {
  double xe = 0.0;
  double rec = 0.0;
  double reg = 0.0;
  double total() const { return xe + rec + reg; }
};

// Loss terms and (optionally) the analytic gradient of the selected sum over
// a batch. seen_text holds one text-embedding row per dense seen class.
// Gradient packing order: sample_encoder, text_encoder, sample_projector,
// text_projector, sample_decoder, text_decoder; each weight row-major, then
// bias.
AlignerLossTerms aligner_loss_and_grad(const AlignerParams& params, const Matrix& xs,
                                       std::span<const uint32_t> dense_labels,
                                       const Matrix& seen_text, bool with_xe, bool with_rec,
                                       bool with_reg, std::vector<double>* grad);

size_t aligner_param_count(const AlignerParams& params);
std::vector<double> aligner_pack(const AlignerParams& params);
void aligner_unpack(std::span<const double> flat, AlignerParams& params);

struct AlignerTrainResult {
  AlignerParams params;
  std::vector<double> epoch_loss;  // mean total loss per epoch
};

// Trains on seen data only (hygiene-checked); the unweighted sum
// xe + rec + reg is minimized with the adaptive-moment optimizer.
AlignerTrainResult train_unseen(const Dataset& ds, std::span<const uint32_t> train_view,
                                const ClassEmbeddingTable& table, const AlignerConfig& cfg);

// Index of the candidate whose projected text embedding is nearest (Euclidean,
// in projection space) to the sample's projection; ties break to the lowest
// index. Candidate rows are raw text embeddings.
size_t predict_nn(const AlignerParams& params, std::span<const double> x,
                  const Matrix& candidate_embeddings);

// "AVALN1" checkpoint; same conventions as the MLP checkpoint.
void save_aligner(std::ostream& out, const AlignerParams& params);
AlignerParams load_aligner(std::istream& in, const std::string& label = "AVALN1");
void save_aligner(const std::string& path, const AlignerParams& params);
AlignerParams load_aligner_file(const std::string& path);

}  // namespace avood
