#include "dataset.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"
#include "rng.hpp"

namespace avood {

std::vector<uint32_t> Dataset::seen_class_ids() const {
  std::vector<uint32_t> ids;
  for (uint32_t c = 0; c < seen_mask.size(); ++c)
    if (seen_mask[c]) ids.push_back(c);
  return ids;
}

std::vector<uint32_t> Dataset::unseen_class_ids() const {
  std::vector<uint32_t> ids;
  for (uint32_t c = 0; c < seen_mask.size(); ++c)
    if (!seen_mask[c]) ids.push_back(c);
  return ids;
}

void Dataset::validate() const {
  const size_t m = num_samples();
  const size_t c = num_classes();
  if (labels.size() != m || split.size() != m)
    throw ValidationError("dataset: per-sample array sizes disagree with feature rows");
  if (seen_mask.size() != c)
    throw ValidationError("dataset: seen_mask size disagrees with class count");
  if (!features.all_finite()) throw ValidationError("dataset: non-finite feature entry");
  for (size_t i = 0; i < m; ++i) {
    if (labels[i] >= c) throw ValidationError("dataset: label out of range at sample " +
                                              std::to_string(i));
    if (split[i] == Split::train && !is_seen_class(labels[i]))
      throw HygieneError("dataset: train sample " + std::to_string(i) +
                         " belongs to unseen class " + std::to_string(labels[i]));
  }
}

SynthConfig SynthConfig::small_profile() {
  SynthConfig cfg;
  cfg.dim_feature = 64;
  cfg.dim_text = 48;
  return cfg;
}

void SynthConfig::validate() const {
  if (n_seen_classes < 1 || n_unseen_classes < 1)
    throw ValidationError("synth: class counts must be >= 1");
  if (n_seen_classes + n_unseen_classes > 10000)
    throw ValidationError("synth: class count exceeds practical cap (10000)");
  if (dim_feature < 2) throw ValidationError("synth: dim_feature must be >= 2");
  if (dim_text < 1) throw ValidationError("synth: dim_text must be >= 1");
  if (samples_per_class_train < 1 || samples_per_class_test < 1)
    throw ValidationError("synth: samples per class must be >= 1");
  if (!(class_separation > 0.0)) throw ValidationError("synth: class_separation must be > 0");
  if (!(noise_scale > 0.0)) throw ValidationError("synth: noise_scale must be > 0");
}

GeneratedData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const uint32_t c_total = cfg.n_seen_classes + cfg.n_unseen_classes;
  const size_t d = cfg.dim_feature;
  const size_t dt = cfg.dim_text;

  // Fixed random text map G: R^D -> R^Dt, entries N(0, 1/D) so norms carry over.
  Matrix text_map(dt, d);
  {
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (size_t i = 0; i < dt; ++i)
      for (size_t j = 0; j < d; ++j) text_map(i, j) = s * rng.normal();
  }

  // Prototypes. Seen classes get fully random unit directions; the text map is
  // applied to the projection of each prototype onto the seen-prototype span,
  // which is what makes nearest-neighbor decoding of unseen classes learnable
  // from seen-only training.
  std::vector<std::vector<double>> prototypes(c_total);
  for (uint32_t c = 0; c < c_total; ++c) {
    prototypes[c] = random_unit_vector(rng, d);
    for (double& x : prototypes[c]) x *= cfg.class_separation;
  }

  // Orthonormalize the seen prototypes (modified Gram-Schmidt) to form the
  // projection basis.
  std::vector<std::vector<double>> basis;
  for (uint32_t c = 0; c < cfg.n_seen_classes; ++c) {
    std::vector<double> v = prototypes[c];
    for (const auto& b : basis) {
      const double coef = dot(v, b);
      for (size_t k = 0; k < d; ++k) v[k] -= coef * b[k];
    }
    const double n = norm2(v);
    if (n > 1e-12 * cfg.class_separation) {
      for (double& x : v) x /= n;
      basis.push_back(std::move(v));
    }
  }
  auto project_seen_span = [&](const std::vector<double>& x) {
    std::vector<double> p(d, 0.0);
    for (const auto& b : basis) {
      const double coef = dot(x, b);
      for (size_t k = 0; k < d; ++k) p[k] += coef * b[k];
    }
    return p;
  };

  ClassEmbeddingTable table;
  table.embeddings = Matrix(c_total, dt);
  const double text_noise = 0.01 * cfg.class_separation;
  for (uint32_t c = 0; c < c_total; ++c) {
    const std::vector<double> proj = project_seen_span(prototypes[c]);
    const std::vector<double> t = matvec(text_map, proj);
    for (size_t j = 0; j < dt; ++j)
      table.embeddings(c, j) = t[j] + text_noise * rng.normal();
  }

  const size_t m_train = static_cast<size_t>(cfg.n_seen_classes) * cfg.samples_per_class_train;
  const size_t m_test = static_cast<size_t>(c_total) * cfg.samples_per_class_test;

  Dataset ds;
  ds.features = Matrix(m_train + m_test, d);
  ds.labels.reserve(m_train + m_test);
  ds.split.reserve(m_train + m_test);
  ds.seen_mask.resize(c_total);
  for (uint32_t c = 0; c < c_total; ++c) {
    const bool seen = c < cfg.n_seen_classes;
    ds.seen_mask[c] = seen ? 1 : 0;
    ds.class_names.push_back((seen ? "seen_" : "unseen_") +
                             std::to_string(seen ? c : c - cfg.n_seen_classes));
  }

  size_t row = 0;
  auto emit = [&](uint32_t cls, Split sp) {
    double* dst = ds.features.data() + row * d;
    const auto& p = prototypes[cls];
    for (size_t k = 0; k < d; ++k) dst[k] = p[k] + cfg.noise_scale * rng.normal();
    ds.labels.push_back(cls);
    ds.split.push_back(sp);
    ++row;
  };
  for (uint32_t c = 0; c < cfg.n_seen_classes; ++c)
    for (uint32_t i = 0; i < cfg.samples_per_class_train; ++i) emit(c, Split::train);
  for (uint32_t c = 0; c < c_total; ++c)
    for (uint32_t i = 0; i < cfg.samples_per_class_test; ++i) emit(c, Split::test);

  ds.validate();
  return {std::move(ds), std::move(table)};
}

SplitViews split_views(const Dataset& ds) {
  ds.validate();
  SplitViews v;
  for (uint32_t i = 0; i < ds.num_samples(); ++i) {
    const bool seen = ds.is_seen_class(ds.labels[i]);
    if (ds.split[i] == Split::train) {
      v.train_seen.push_back(i);
    } else if (seen) {
      v.test_seen.push_back(i);
    } else {
      v.test_unseen.push_back(i);
    }
  }
  if (v.train_seen.empty()) v.warnings.push_back("train_seen partition is empty");
  if (v.test_seen.empty()) v.warnings.push_back("test_seen partition is empty");
  if (v.test_unseen.empty()) v.warnings.push_back("test_unseen partition is empty");
  return v;
}

void l2_normalize_features(Dataset& ds) {
  for (size_t i = 0; i < ds.num_samples(); ++i) {
    auto r = ds.features.row(i);
    const double n = norm2(r);
    if (n > 0.0)
      for (double& x : r) x /= n;
  }
}

}  // namespace avood
