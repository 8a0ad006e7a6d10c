#include "aligner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace avood {

namespace {

constexpr char kMagic[6] = {'A', 'V', 'A', 'L', 'N', '1'};

AffineLayer init_layer(size_t out_dim, size_t in_dim, Rng& rng) {
  AffineLayer l;
  l.w = Matrix(out_dim, in_dim);
  l.b.assign(out_dim, 0.0);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim));
  for (size_t i = 0; i < l.w.size(); ++i) l.w.data()[i] = rng.uniform(-limit, limit);
  return l;
}

std::vector<double> affine(const AffineLayer& l, std::span<const double> x) {
  std::vector<double> y = matvec(l.w, x);
  for (size_t i = 0; i < y.size(); ++i) y[i] += l.b[i];
  return y;
}

double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// Per-layer gradient accumulator.
struct LayerGrad {
  Matrix w;
  std::vector<double> b;
  explicit LayerGrad(const AffineLayer& l) : w(l.out_dim(), l.in_dim()), b(l.out_dim(), 0.0) {}
  void add(std::span<const double> delta, std::span<const double> input) {
    for (size_t i = 0; i < delta.size(); ++i) {
      const double di = delta[i];
      b[i] += di;
      if (di == 0.0) continue;
      double* row = w.data() + i * w.cols();
      for (size_t j = 0; j < input.size(); ++j) row[j] += di * input[j];
    }
  }
};

void check_finite(const AlignerParams& p, const char* who) {
  for (const AffineLayer* l : {&p.sample_encoder, &p.text_encoder, &p.sample_projector,
                               &p.text_projector, &p.sample_decoder, &p.text_decoder}) {
    if (!l->w.all_finite() || !all_finite(l->b))
      throw NumericError(std::string(who) + ": non-finite parameter");
  }
}

}  // namespace

void AlignerConfig::validate() const {
  if (embed_dim < 1 || proj_dim < 1) throw ValidationError("aligner config: dims must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("aligner config: learning_rate must be > 0");
  if (batch_size < 1) throw ValidationError("aligner config: batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("aligner config: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("aligner config: epsilon must be > 0");
}

AlignerParams init_aligner(size_t feature_dim, size_t text_dim, const AlignerConfig& cfg) {
  cfg.validate();
  if (feature_dim < 1 || text_dim < 1)
    throw ValidationError("init_aligner: input dims must be >= 1");
  Rng rng(cfg.seed);
  AlignerParams p;
  p.sample_encoder = init_layer(cfg.embed_dim, feature_dim, rng);
  p.text_encoder = init_layer(cfg.embed_dim, text_dim, rng);
  p.sample_projector = init_layer(cfg.proj_dim, cfg.embed_dim, rng);
  p.text_projector = init_layer(cfg.proj_dim, cfg.embed_dim, rng);
  p.sample_decoder = init_layer(cfg.embed_dim, cfg.proj_dim, rng);
  p.text_decoder = init_layer(cfg.embed_dim, cfg.proj_dim, rng);
  p.trained_with = cfg;
  return p;
}

EncodeOut encode_sample(const AlignerParams& params, std::span<const double> x) {
  if (x.size() != params.feature_dim()) throw ValidationError("encode_sample: dim mismatch");
  EncodeOut e;
  e.encoded = affine(params.sample_encoder, x);
  for (double& v : e.encoded) v = std::max(0.0, v);
  e.projected = affine(params.sample_projector, e.encoded);
  e.reconstructed = affine(params.sample_decoder, e.projected);
  return e;
}

EncodeOut encode_text(const AlignerParams& params, std::span<const double> t) {
  if (t.size() != params.text_dim()) throw ValidationError("encode_text: dim mismatch");
  EncodeOut e;
  e.encoded = affine(params.text_encoder, t);
  for (double& v : e.encoded) v = std::max(0.0, v);
  e.projected = affine(params.text_projector, e.encoded);
  e.reconstructed = affine(params.text_decoder, e.projected);
  return e;
}

double loss_xe(const Matrix& theta_o, const Matrix& theta_w_table,
               std::span<const uint32_t> labels) {
  if (theta_o.rows() == 0) throw ValidationError("loss_xe: empty batch");
  if (theta_o.cols() != theta_w_table.cols())
    throw ValidationError("loss_xe: projection dims differ");
  if (labels.size() != theta_o.rows()) throw ValidationError("loss_xe: label count mismatch");
  double total = 0.0;
  std::vector<double> sims(theta_w_table.rows());
  for (size_t i = 0; i < theta_o.rows(); ++i) {
    if (labels[i] >= theta_w_table.rows()) throw ValidationError("loss_xe: label out of range");
    for (size_t c = 0; c < theta_w_table.rows(); ++c)
      sims[c] = dot(theta_w_table.row(c), theta_o.row(i));
    total += logsumexp(sims) - sims[labels[i]];
  }
  return total / static_cast<double>(theta_o.rows());
}

double loss_rec(const Matrix& rho_o, const Matrix& rho_w, const Matrix& w) {
  if (rho_o.rows() != w.rows() || rho_w.rows() != w.rows())
    throw ValidationError("loss_rec: batch sizes differ");
  if (rho_o.cols() != w.cols() || rho_w.cols() != w.cols())
    throw ValidationError("loss_rec: dims differ");
  if (w.rows() == 0) throw ValidationError("loss_rec: empty batch");
  double total = 0.0;
  for (size_t i = 0; i < w.rows(); ++i)
    total += mse(rho_o.row(i), w.row(i)) + mse(rho_w.row(i), w.row(i));
  return total / static_cast<double>(w.rows());
}

double loss_reg(const Matrix& theta_o, const Matrix& theta_w) {
  if (theta_o.rows() != theta_w.rows()) throw ValidationError("loss_reg: batch sizes differ");
  if (theta_o.cols() != theta_w.cols()) throw ValidationError("loss_reg: dims differ");
  if (theta_o.rows() == 0) throw ValidationError("loss_reg: empty batch");
  double total = 0.0;
  for (size_t i = 0; i < theta_o.rows(); ++i) total += mse(theta_o.row(i), theta_w.row(i));
  return total / static_cast<double>(theta_o.rows());
}

size_t aligner_param_count(const AlignerParams& p) {
  size_t n = 0;
  for (const AffineLayer* l : {&p.sample_encoder, &p.text_encoder, &p.sample_projector,
                               &p.text_projector, &p.sample_decoder, &p.text_decoder})
    n += l->w.size() + l->b.size();
  return n;
}

std::vector<double> aligner_pack(const AlignerParams& p) {
  std::vector<double> flat;
  flat.reserve(aligner_param_count(p));
  for (const AffineLayer* l : {&p.sample_encoder, &p.text_encoder, &p.sample_projector,
                               &p.text_projector, &p.sample_decoder, &p.text_decoder}) {
    flat.insert(flat.end(), l->w.data(), l->w.data() + l->w.size());
    flat.insert(flat.end(), l->b.begin(), l->b.end());
  }
  return flat;
}

void aligner_unpack(std::span<const double> flat, AlignerParams& p) {
  if (flat.size() != aligner_param_count(p)) throw ValidationError("aligner_unpack: size mismatch");
  size_t at = 0;
  for (AffineLayer* l : {&p.sample_encoder, &p.text_encoder, &p.sample_projector,
                         &p.text_projector, &p.sample_decoder, &p.text_decoder}) {
    std::copy(flat.begin() + at, flat.begin() + at + l->w.size(), l->w.data());
    at += l->w.size();
    std::copy(flat.begin() + at, flat.begin() + at + l->b.size(), l->b.begin());
    at += l->b.size();
  }
}

AlignerLossTerms aligner_loss_and_grad(const AlignerParams& params, const Matrix& xs,
                                       std::span<const uint32_t> dense_labels,
                                       const Matrix& seen_text, bool with_xe, bool with_rec,
                                       bool with_reg, std::vector<double>* grad) {
  const size_t n = xs.rows();
  const size_t n_classes = seen_text.rows();
  if (n == 0) throw ValidationError("aligner_loss_and_grad: empty batch");
  if (dense_labels.size() != n) throw ValidationError("aligner_loss_and_grad: label mismatch");
  for (uint32_t l : dense_labels)
    if (l >= n_classes) throw ValidationError("aligner_loss_and_grad: label out of range");
  const size_t d_e = params.embed_dim();
  const size_t d_p = params.proj_dim();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Text pipeline per dense class (pre-activation kept for the rectifier).
  std::vector<std::vector<double>> w_pre(n_classes), w_act(n_classes), theta_w(n_classes),
      rho_w(n_classes);
  for (size_t c = 0; c < n_classes; ++c) {
    w_pre[c] = affine(params.text_encoder, seen_text.row(c));
    w_act[c] = w_pre[c];
    for (double& v : w_act[c]) v = std::max(0.0, v);
    theta_w[c] = affine(params.text_projector, w_act[c]);
    rho_w[c] = affine(params.text_decoder, theta_w[c]);
  }

  // Sample pipeline per batch element.
  std::vector<std::vector<double>> o_pre(n), o_act(n), theta_o(n), rho_o(n);
  for (size_t i = 0; i < n; ++i) {
    o_pre[i] = affine(params.sample_encoder, xs.row(i));
    o_act[i] = o_pre[i];
    for (double& v : o_act[i]) v = std::max(0.0, v);
    theta_o[i] = affine(params.sample_projector, o_act[i]);
    rho_o[i] = affine(params.sample_decoder, theta_o[i]);
  }

  AlignerLossTerms terms;
  std::vector<std::vector<double>> probs(n);  // softmax over classes, per sample
  for (size_t i = 0; i < n; ++i) {
    const uint32_t y = dense_labels[i];
    if (with_xe) {
      std::vector<double> sims(n_classes);
      for (size_t c = 0; c < n_classes; ++c) sims[c] = dot(theta_w[c], theta_o[i]);
      terms.xe += (logsumexp(sims) - sims[y]) * inv_n;
      probs[i] = softmax(sims);
    }
    if (with_rec) terms.rec += (mse(rho_o[i], w_act[y]) + mse(rho_w[y], w_act[y])) * inv_n;
    if (with_reg) terms.reg += mse(theta_o[i], theta_w[y]) * inv_n;
  }
  if (grad == nullptr) return terms;

  LayerGrad g_oenc(params.sample_encoder), g_wenc(params.text_encoder),
      g_oproj(params.sample_projector), g_wproj(params.text_projector),
      g_do(params.sample_decoder), g_dw(params.text_decoder);

  // Upstream gradients per dense class, accumulated over the batch.
  std::vector<std::vector<double>> d_theta_w(n_classes, std::vector<double>(d_p, 0.0));
  std::vector<std::vector<double>> d_rho_w(n_classes, std::vector<double>(d_e, 0.0));
  std::vector<std::vector<double>> d_w(n_classes, std::vector<double>(d_e, 0.0));

  const double rec_coef = 2.0 * inv_n / static_cast<double>(d_e);
  const double reg_coef = 2.0 * inv_n / static_cast<double>(d_p);

  for (size_t i = 0; i < n; ++i) {
    const uint32_t y = dense_labels[i];
    std::vector<double> d_theta_o(d_p, 0.0);

    if (with_xe) {
      for (size_t c = 0; c < n_classes; ++c) {
        const double coef = inv_n * (probs[i][c] - (c == y ? 1.0 : 0.0));
        for (size_t k = 0; k < d_p; ++k) {
          d_theta_o[k] += coef * theta_w[c][k];
          d_theta_w[c][k] += coef * theta_o[i][k];
        }
      }
    }
    if (with_reg) {
      for (size_t k = 0; k < d_p; ++k) {
        const double diff = theta_o[i][k] - theta_w[y][k];
        d_theta_o[k] += reg_coef * diff;
        d_theta_w[y][k] -= reg_coef * diff;
      }
    }
    std::vector<double> d_rho_o(d_e, 0.0);
    if (with_rec) {
      for (size_t k = 0; k < d_e; ++k) {
        d_rho_o[k] = rec_coef * (rho_o[i][k] - w_act[y][k]);
        d_rho_w[y][k] += rec_coef * (rho_w[y][k] - w_act[y][k]);
        // Target-side contributions of the two squared errors.
        d_w[y][k] += rec_coef * ((w_act[y][k] - rho_o[i][k]) + (w_act[y][k] - rho_w[y][k]));
      }
      g_do.add(d_rho_o, theta_o[i]);
      std::vector<double> back = matvec_transposed(params.sample_decoder.w, d_rho_o);
      for (size_t k = 0; k < d_p; ++k) d_theta_o[k] += back[k];
    }

    g_oproj.add(d_theta_o, o_act[i]);
    std::vector<double> d_o = matvec_transposed(params.sample_projector.w, d_theta_o);
    for (size_t k = 0; k < d_e; ++k)
      if (o_pre[i][k] <= 0.0) d_o[k] = 0.0;
    g_oenc.add(d_o, xs.row(i));
  }

  for (size_t c = 0; c < n_classes; ++c) {
    if (with_rec) {
      g_dw.add(d_rho_w[c], theta_w[c]);
      std::vector<double> back = matvec_transposed(params.text_decoder.w, d_rho_w[c]);
      for (size_t k = 0; k < d_p; ++k) d_theta_w[c][k] += back[k];
    }
    g_wproj.add(d_theta_w[c], w_act[c]);
    std::vector<double> back = matvec_transposed(params.text_projector.w, d_theta_w[c]);
    for (size_t k = 0; k < d_e; ++k) d_w[c][k] += back[k];
    for (size_t k = 0; k < d_e; ++k)
      if (w_pre[c][k] <= 0.0) d_w[c][k] = 0.0;
    g_wenc.add(d_w[c], seen_text.row(c));
  }

  grad->clear();
  grad->reserve(aligner_param_count(params));
  for (const LayerGrad* g : {&g_oenc, &g_wenc, &g_oproj, &g_wproj, &g_do, &g_dw}) {
    grad->insert(grad->end(), g->w.data(), g->w.data() + g->w.size());
    grad->insert(grad->end(), g->b.begin(), g->b.end());
  }
  return terms;
}

AlignerTrainResult train_unseen(const Dataset& ds, std::span<const uint32_t> train_view,
                                const ClassEmbeddingTable& table, const AlignerConfig& cfg) {
  cfg.validate();
  if (train_view.empty()) throw ValidationError("train_unseen: empty training view");
  if (table.num_classes() != ds.num_classes())
    throw ValidationError("train_unseen: embedding table class count differs from dataset");
  for (uint32_t idx : train_view) {
    if (idx >= ds.num_samples()) throw ValidationError("train_unseen: view index out of range");
    if (!ds.is_seen_class(ds.labels[idx]))
      throw HygieneError("train_unseen: unseen-class sample " + std::to_string(idx) +
                         " in training path");
  }

  const std::vector<uint32_t> seen_ids = ds.seen_class_ids();
  std::vector<uint32_t> dense_of_global(ds.num_classes(), 0);
  Matrix seen_text(seen_ids.size(), table.dim());
  for (uint32_t d = 0; d < seen_ids.size(); ++d) {
    dense_of_global[seen_ids[d]] = d;
    std::copy_n(table.embeddings.row(seen_ids[d]).data(), table.dim(), seen_text.row(d).data());
  }

  AlignerTrainResult out;
  out.params = init_aligner(ds.dim(), table.dim(), cfg);
  if (cfg.epochs == 0) return out;

  std::vector<double> flat = aligner_pack(out.params);
  std::vector<double> m(flat.size(), 0.0), v(flat.size(), 0.0), grad;
  uint64_t step = 0;

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<uint32_t> order(train_view.begin(), train_view.end());

  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t count = std::min<size_t>(cfg.batch_size, order.size() - start);
      Matrix xs(count, ds.dim());
      std::vector<uint32_t> labels(count);
      for (size_t i = 0; i < count; ++i) {
        const uint32_t idx = order[start + i];
        std::copy_n(ds.features.row(idx).data(), ds.dim(), xs.row(i).data());
        labels[i] = dense_of_global[ds.labels[idx]];
      }
      const AlignerLossTerms terms =
          aligner_loss_and_grad(out.params, xs, labels, seen_text, true, true, true, &grad);
      epoch_loss += terms.total() * static_cast<double>(count);

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (size_t i = 0; i < flat.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        flat[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
      }
      aligner_unpack(flat, out.params);
    }
    out.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  check_finite(out.params, "train_unseen");
  return out;
}

size_t predict_nn(const AlignerParams& params, std::span<const double> x,
                  const Matrix& candidate_embeddings) {
  if (candidate_embeddings.rows() == 0) throw ValidationError("predict_nn: empty candidate set");
  EncodeOut sample = encode_sample(params, x);
  std::vector<double> theta_s = std::move(sample.projected);
  const bool normalize = params.trained_with.normalize_projections;
  auto unit = [](std::vector<double>& v) {
    const double nrm = norm2(v);
    if (nrm > 0.0)
      for (double& e : v) e /= nrm;
  };
  if (normalize) unit(theta_s);

  size_t best = 0;
  double best_dist = 0.0;
  for (size_t j = 0; j < candidate_embeddings.rows(); ++j) {
    EncodeOut text = encode_text(params, candidate_embeddings.row(j));
    std::vector<double> theta_t = std::move(text.projected);
    if (normalize) unit(theta_t);
    double d2 = 0.0;
    for (size_t k = 0; k < theta_t.size(); ++k) {
      const double diff = theta_t[k] - theta_s[k];
      d2 += diff * diff;
    }
    if (j == 0 || d2 < best_dist) {
      best = j;
      best_dist = d2;
    }
  }
  return best;
}

void save_aligner(std::ostream& out, const AlignerParams& params) {
  if (params.sample_encoder.w.empty()) throw ValidationError("save_aligner: uninitialized params");
  LeWriter w(out);
  w.bytes(kMagic, 6);
  w.u32(static_cast<uint32_t>(params.feature_dim()));
  w.u32(static_cast<uint32_t>(params.text_dim()));
  w.u32(static_cast<uint32_t>(params.embed_dim()));
  w.u32(static_cast<uint32_t>(params.proj_dim()));
  const AlignerConfig& c = params.trained_with;
  w.f64(c.learning_rate);
  w.f64(c.beta1);
  w.f64(c.beta2);
  w.f64(c.epsilon);
  w.u32(c.batch_size);
  w.u32(c.epochs);
  w.u64(c.seed);
  w.u8(c.normalize_projections ? 1 : 0);
  for (const AffineLayer* l :
       {&params.sample_encoder, &params.text_encoder, &params.sample_projector,
        &params.text_projector, &params.sample_decoder, &params.text_decoder}) {
    w.f64_array(l->w.data(), l->w.size());
    w.f64_array(l->b.data(), l->b.size());
  }
  if (!w.good()) throw DataError("save_aligner: write failed");
}

AlignerParams load_aligner(std::istream& in, const std::string& label) {
  LeReader r(in, label);
  r.expect_magic(kMagic, 6);
  const uint32_t d = r.u32();
  const uint32_t dt = r.u32();
  const uint32_t de = r.u32();
  const uint32_t dp = r.u32();
  if (d == 0 || dt == 0 || de == 0 || dp == 0)
    throw FormatError(label + ": zero dimension in header", 6);
  AlignerParams p;
  AlignerConfig& c = p.trained_with;
  c.embed_dim = de;
  c.proj_dim = dp;
  c.learning_rate = r.f64();
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.epsilon = r.f64();
  c.batch_size = r.u32();
  c.epochs = r.u32();
  c.seed = r.u64();
  const uint8_t norm_flag = r.u8();
  if (norm_flag > 1) throw FormatError(label + ": bad normalize flag", r.offset() - 1);
  c.normalize_projections = norm_flag == 1;

  auto read_layer = [&](size_t out_dim, size_t in_dim) {
    AffineLayer l;
    l.w = Matrix(out_dim, in_dim);
    r.f64_array(l.w.data(), l.w.size());
    l.b.resize(out_dim);
    r.f64_array(l.b.data(), l.b.size());
    return l;
  };
  p.sample_encoder = read_layer(de, d);
  p.text_encoder = read_layer(de, dt);
  p.sample_projector = read_layer(dp, de);
  p.text_projector = read_layer(dp, de);
  p.sample_decoder = read_layer(de, dp);
  p.text_decoder = read_layer(de, dp);
  r.expect_eof();
  check_finite(p, label.c_str());
  return p;
}

void save_aligner(const std::string& path, const AlignerParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_aligner: cannot open " + path);
  save_aligner(out, params);
}

AlignerParams load_aligner_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_aligner: cannot open " + path);
  return load_aligner(in, path);
}

}  // namespace avood
