#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace avood {

enum class Split : uint8_t { train = 0, test = 1 };

// Fused audio-visual-style feature vectors with per-sample labels and
// train/test tags, plus per-class seen/unseen flags. Immutable once built;
// `validate()` enforces the zero-shot constraints (train samples only from
// seen classes, labels in range).
struct Dataset {
  Matrix features;                  // M_total × D
  std::vector<uint32_t> labels;     // per sample, global class index
  std::vector<std::string> class_names;
  std::vector<uint8_t> seen_mask;   // per class, 1 = seen
  std::vector<Split> split;         // per sample

  size_t num_samples() const { return features.rows(); }
  size_t dim() const { return features.cols(); }
  size_t num_classes() const { return class_names.size(); }
  bool is_seen_class(uint32_t c) const { return seen_mask[c] != 0; }

  std::vector<uint32_t> seen_class_ids() const;
  std::vector<uint32_t> unseen_class_ids() const;

  // Throws ValidationError / HygieneError when an invariant fails.
  void validate() const;
};

// One fused text embedding per class (row c pairs with class c).
struct ClassEmbeddingTable {
  Matrix embeddings;  // C_total × D_t

  size_t num_classes() const { return embeddings.rows(); }
  size_t dim() const { return embeddings.cols(); }
};

// Synthetic data profile. Defaults mirror the 1536-d fused-feature geometry;
// small_profile() keeps tests fast.
struct SynthConfig {
  uint32_t n_seen_classes = 5;
  uint32_t n_unseen_classes = 3;
  uint32_t dim_feature = 1536;
  uint32_t dim_text = 1024;
  uint32_t samples_per_class_train = 40;
  uint32_t samples_per_class_test = 25;
  double class_separation = 6.0;
  double noise_scale = 1.0;
  uint64_t seed = 42;

  static SynthConfig small_profile();
  void validate() const;
};

struct GeneratedData {
  Dataset dataset;
  ClassEmbeddingTable embeddings;
};

// Per class, a random unit prototype scaled by class_separation; samples are
// prototype + Gaussian noise. Text embeddings are a fixed linear image of the
// prototype (factored through the seen-prototype span, so nearest-neighbor
// decoding transfers to unseen classes) plus small noise. Train samples come
// only from seen classes. Deterministic given the seed.
GeneratedData generate_synthetic(const SynthConfig& cfg);

// Index views over a dataset. Empty members are legal (ZSL-only runs) and
// reported as warnings rather than errors.
struct SplitViews {
  std::vector<uint32_t> train_seen;
  std::vector<uint32_t> test_seen;
  std::vector<uint32_t> test_unseen;
  std::vector<std::string> warnings;
};

SplitViews split_views(const Dataset& ds);

// Scales every feature row to unit Euclidean norm (zero rows left untouched).
void l2_normalize_features(Dataset& ds);

}  // namespace avood
