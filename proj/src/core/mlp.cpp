#include "mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "rng.hpp"

namespace avood {

namespace {

constexpr char kMagic[6] = {'A', 'V', 'M', 'L', 'P', '1'};

void check_finite_params(const MlpParams& p, const char* who) {
  for (const auto& l : p.layers) {
    if (!l.w.all_finite() || !all_finite(l.b))
      throw NumericError(std::string(who) + ": non-finite parameter");
  }
}

// Forward pass keeping pre-activations and activations for backprop.
struct ForwardCache {
  std::vector<std::vector<double>> pre;   // per layer
  std::vector<std::vector<double>> act;   // act[0] = input, act[L] = logits
};

void forward_cached(const MlpParams& p, std::span<const double> x, ForwardCache& c) {
  const size_t n_layers = p.layers.size();
  c.pre.resize(n_layers);
  c.act.resize(n_layers + 1);
  c.act[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < n_layers; ++l) {
    const AffineLayer& layer = p.layers[l];
    c.pre[l] = matvec(layer.w, c.act[l]);
    for (size_t i = 0; i < c.pre[l].size(); ++i) c.pre[l][i] += layer.b[i];
    c.act[l + 1] = c.pre[l];
    if (l + 1 < n_layers) {
      for (double& v : c.act[l + 1]) v = std::max(0.0, v);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be > 0");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("train config: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("train config: epsilon must be > 0");
  if (hidden1 < 1 || hidden2 < 1) throw ValidationError("train config: hidden dims must be >= 1");
}

MlpParams init_mlp(std::span<const size_t> dims, uint64_t seed) {
  if (dims.size() < 2) throw ValidationError("init_mlp: need at least input and output dims");
  for (size_t d : dims)
    if (d == 0) throw ValidationError("init_mlp: zero dimension");
  Rng rng(seed);
  MlpParams p;
  p.trained_with.seed = seed;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    AffineLayer layer;
    layer.w = Matrix(dims[l + 1], dims[l]);
    layer.b.assign(dims[l + 1], 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l]));
    for (size_t i = 0; i < layer.w.size(); ++i) layer.w.data()[i] = rng.uniform(-limit, limit);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x) {
  if (params.layers.empty()) throw ValidationError("mlp_forward: uninitialized params");
  if (x.size() != params.input_dim()) throw ValidationError("mlp_forward: input dim mismatch");
  ForwardCache c;
  forward_cached(params, x, c);
  return c.act.back();
}

double cross_entropy(std::span<const double> logits, size_t label) {
  if (label >= logits.size()) throw ValidationError("cross_entropy: label out of range");
  return logsumexp(logits) - logits[label];
}

size_t predict_seen(const MlpParams& params, std::span<const double> x) {
  const std::vector<double> logits = mlp_forward(params, x);
  size_t best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

size_t mlp_param_count(const MlpParams& params) {
  size_t n = 0;
  for (const auto& l : params.layers) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> mlp_pack(const MlpParams& params) {
  std::vector<double> flat;
  flat.reserve(mlp_param_count(params));
  for (const auto& l : params.layers) {
    flat.insert(flat.end(), l.w.data(), l.w.data() + l.w.size());
    flat.insert(flat.end(), l.b.begin(), l.b.end());
  }
  return flat;
}

void mlp_unpack(std::span<const double> flat, MlpParams& params) {
  if (flat.size() != mlp_param_count(params)) throw ValidationError("mlp_unpack: size mismatch");
  size_t at = 0;
  for (auto& l : params.layers) {
    std::copy(flat.begin() + at, flat.begin() + at + l.w.size(), l.w.data());
    at += l.w.size();
    std::copy(flat.begin() + at, flat.begin() + at + l.b.size(), l.b.begin());
    at += l.b.size();
  }
}

double mlp_loss_and_grad(const MlpParams& params, const Matrix& xs,
                         std::span<const uint32_t> dense_labels, std::vector<double>* grad) {
  const size_t batch = xs.rows();
  if (batch == 0) throw ValidationError("mlp_loss_and_grad: empty batch");
  if (dense_labels.size() != batch)
    throw ValidationError("mlp_loss_and_grad: label count mismatch");
  const size_t n_layers = params.layers.size();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  std::vector<Matrix> gw(n_layers);
  std::vector<std::vector<double>> gb(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    gw[l] = Matrix(params.layers[l].out_dim(), params.layers[l].in_dim());
    gb[l].assign(params.layers[l].out_dim(), 0.0);
  }

  double loss = 0.0;
  ForwardCache c;
  for (size_t s = 0; s < batch; ++s) {
    forward_cached(params, xs.row(s), c);
    const std::vector<double>& logits = c.act.back();
    const size_t label = dense_labels[s];
    if (label >= logits.size()) throw ValidationError("mlp_loss_and_grad: label out of range");
    loss += cross_entropy(logits, label) * inv_batch;
    if (grad == nullptr) continue;

    // d(mean CE)/d(logits) = (softmax − onehot)/batch
    std::vector<double> delta = softmax(logits);
    delta[label] -= 1.0;
    for (double& v : delta) v *= inv_batch;

    for (size_t l = n_layers; l-- > 0;) {
      const AffineLayer& layer = params.layers[l];
      const std::vector<double>& input = c.act[l];
      for (size_t i = 0; i < layer.out_dim(); ++i) {
        const double di = delta[i];
        gb[l][i] += di;
        if (di == 0.0) continue;
        double* grow = gw[l].data() + i * layer.in_dim();
        for (size_t j = 0; j < layer.in_dim(); ++j) grow[j] += di * input[j];
      }
      if (l == 0) break;
      std::vector<double> next = matvec_transposed(layer.w, delta);
      for (size_t j = 0; j < next.size(); ++j)
        if (c.pre[l - 1][j] <= 0.0) next[j] = 0.0;
      delta = std::move(next);
    }
  }

  if (grad != nullptr) {
    grad->clear();
    grad->reserve(mlp_param_count(params));
    for (size_t l = 0; l < n_layers; ++l) {
      grad->insert(grad->end(), gw[l].data(), gw[l].data() + gw[l].size());
      grad->insert(grad->end(), gb[l].begin(), gb[l].end());
    }
  }
  return loss;
}

MlpTrainResult train_seen(const Dataset& ds, std::span<const uint32_t> train_view,
                          const TrainConfig& cfg) {
  cfg.validate();
  if (train_view.empty()) throw ValidationError("train_seen: empty training view");
  for (uint32_t idx : train_view) {
    if (idx >= ds.num_samples()) throw ValidationError("train_seen: view index out of range");
    if (!ds.is_seen_class(ds.labels[idx]))
      throw HygieneError("train_seen: unseen-class sample " + std::to_string(idx) +
                         " in training path");
  }

  const std::vector<uint32_t> seen_ids = ds.seen_class_ids();
  std::vector<uint32_t> dense_of_global(ds.num_classes(), 0);
  for (uint32_t d = 0; d < seen_ids.size(); ++d) dense_of_global[seen_ids[d]] = d;

  const size_t dims[4] = {ds.dim(), cfg.hidden1, cfg.hidden2, seen_ids.size()};
  MlpTrainResult out;
  out.params = init_mlp(dims, cfg.seed);
  out.params.seen_class_ids = seen_ids;
  out.params.trained_with = cfg;
  if (cfg.epochs == 0) return out;

  std::vector<double> flat = mlp_pack(out.params);
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
      const double batch_loss = mlp_loss_and_grad(out.params, xs, labels, &grad);
      epoch_loss += batch_loss * static_cast<double>(count);

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (size_t i = 0; i < flat.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        flat[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
      }
      mlp_unpack(flat, out.params);
    }
    out.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  check_finite_params(out.params, "train_seen");
  return out;
}

void save_mlp(std::ostream& out, const MlpParams& params) {
  if (params.layers.empty()) throw ValidationError("save_mlp: uninitialized params");
  LeWriter w(out);
  w.bytes(kMagic, 6);
  w.u32(static_cast<uint32_t>(params.layers.size()));
  w.u32(static_cast<uint32_t>(params.layers.front().in_dim()));
  for (const auto& l : params.layers) w.u32(static_cast<uint32_t>(l.out_dim()));
  w.u32(static_cast<uint32_t>(params.seen_class_ids.size()));
  for (uint32_t id : params.seen_class_ids) w.u32(id);
  const TrainConfig& c = params.trained_with;
  w.u32(c.hidden1);
  w.u32(c.hidden2);
  w.f64(c.learning_rate);
  w.f64(c.beta1);
  w.f64(c.beta2);
  w.f64(c.epsilon);
  w.u32(c.batch_size);
  w.u32(c.epochs);
  w.u64(c.seed);
  for (const auto& l : params.layers) {
    w.f64_array(l.w.data(), l.w.size());
    w.f64_array(l.b.data(), l.b.size());
  }
  if (!w.good()) throw DataError("save_mlp: write failed");
}

MlpParams load_mlp(std::istream& in, const std::string& label) {
  LeReader r(in, label);
  r.expect_magic(kMagic, 6);
  const uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) throw FormatError(label + ": bad layer count", 6);
  std::vector<size_t> dims(n_layers + 1);
  for (auto& d : dims) {
    const size_t at = r.offset();
    d = r.u32();
    if (d == 0) throw FormatError(label + ": zero dimension", at);
  }
  MlpParams p;
  const uint32_t n_ids = r.u32();
  if (n_ids != dims.back())
    throw FormatError(label + ": seen-class id count disagrees with output width", r.offset() - 4);
  p.seen_class_ids.resize(n_ids);
  for (auto& id : p.seen_class_ids) id = r.u32();
  TrainConfig& c = p.trained_with;
  c.hidden1 = r.u32();
  c.hidden2 = r.u32();
  c.learning_rate = r.f64();
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.epsilon = r.f64();
  c.batch_size = r.u32();
  c.epochs = r.u32();
  c.seed = r.u64();
  for (uint32_t l = 0; l < n_layers; ++l) {
    AffineLayer layer;
    layer.w = Matrix(dims[l + 1], dims[l]);
    r.f64_array(layer.w.data(), layer.w.size());
    layer.b.resize(dims[l + 1]);
    r.f64_array(layer.b.data(), layer.b.size());
    p.layers.push_back(std::move(layer));
  }
  r.expect_eof();
  check_finite_params(p, label.c_str());
  return p;
}

void save_mlp(const std::string& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_mlp: cannot open " + path);
  save_mlp(out, params);
}

MlpParams load_mlp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_mlp: cannot open " + path);
  return load_mlp(in, path);
}

}  // namespace avood
