#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "matrix.hpp"

namespace avood {

// One affine map. Weight is out×in, bias is out.
struct AffineLayer {
  Matrix w;
  std::vector<double> b;

  size_t in_dim() const { return w.cols(); }
  size_t out_dim() const { return w.rows(); }
  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

// Adaptive-moment optimizer settings shared by both trainers.
struct TrainConfig {
  uint32_t hidden1 = 512;
  uint32_t hidden2 = 512;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint32_t batch_size = 64;
  uint32_t epochs = 50;
  uint64_t seed = 42;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// 3-layer rectifier MLP over fused features; the logits double as the OOD
// detector's input. seen_class_ids maps dense logit index -> global class id.
struct MlpParams {
  std::vector<AffineLayer> layers;
  std::vector<uint32_t> seen_class_ids;
  TrainConfig trained_with;

  size_t input_dim() const { return layers.front().in_dim(); }
  size_t num_outputs() const { return layers.back().out_dim(); }
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Scaled-uniform fan-in init (entries in ±sqrt(6/fan_in)), biases zero.
// dims = [input, hidden..., outputs], at least two entries, all >= 1.
MlpParams init_mlp(std::span<const size_t> dims, uint64_t seed);

// Logits for one feature vector.
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x);

// logsumexp(logits) − logits[label]; always >= 0.
double cross_entropy(std::span<const double> logits, size_t label);

// Argmax with lowest-index tie break; returns the dense logit index.
size_t predict_seen(const MlpParams& params, std::span<const double> x);

struct MlpTrainResult {
  MlpParams params;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Trains on the given train-seen view (dataset indices). Labels are densified
// to 0..C_s−1 in ascending global-class order. Any unseen-class sample in the
// view is a hygiene error. Deterministic given cfg.seed.
MlpTrainResult train_seen(const Dataset& ds, std::span<const uint32_t> train_view,
                          const TrainConfig& cfg);

// Mean cross-entropy and its analytic gradient (packed layer by layer, each
// weight row-major then bias) over a fixed batch. Exposed for gradient tests.
double mlp_loss_and_grad(const MlpParams& params, const Matrix& xs,
                         std::span<const uint32_t> dense_labels, std::vector<double>* grad);

size_t mlp_param_count(const MlpParams& params);
std::vector<double> mlp_pack(const MlpParams& params);
void mlp_unpack(std::span<const double> flat, MlpParams& params);

// "AVMLP1" checkpoint: magic, dims header, seen-class ids, config echo,
// f64 payload. Round-trips bit-exactly.
void save_mlp(std::ostream& out, const MlpParams& params);
MlpParams load_mlp(std::istream& in, const std::string& label = "AVMLP1");
void save_mlp(const std::string& path, const MlpParams& params);
MlpParams load_mlp_file(const std::string& path);

}  // namespace avood
