#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dataset.hpp"
#include "errors.hpp"
#include "mlp.hpp"
#include "numerics.hpp"
#include "rng.hpp"

using namespace avood;

namespace {

// Straight-line reimplementation of the affine+rectifier chain.
std::vector<double> naive_forward(const MlpParams& p, std::span<const double> x) {
  std::vector<double> h(x.begin(), x.end());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const AffineLayer& layer = p.layers[l];
    std::vector<double> z(layer.out_dim());
    for (size_t i = 0; i < layer.out_dim(); ++i) {
      double acc = layer.b[i];
      for (size_t j = 0; j < layer.in_dim(); ++j) acc += layer.w(i, j) * h[j];
      z[i] = acc;
    }
    if (l + 1 < p.layers.size())
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    h = std::move(z);
  }
  return h;
}

MlpParams random_params(std::span<const size_t> dims, uint64_t seed) {
  MlpParams p = init_mlp(dims, seed);
  Rng rng(seed ^ 0xabcdef);
  for (auto& l : p.layers)
    for (double& b : l.b) b = 0.3 * rng.normal();
  return p;
}

GeneratedData two_class_data() {
  SynthConfig cfg = SynthConfig::small_profile();
  cfg.n_seen_classes = 2;
  cfg.n_unseen_classes = 1;
  cfg.dim_feature = 16;
  cfg.dim_text = 8;
  cfg.samples_per_class_train = 15;
  cfg.samples_per_class_test = 5;
  cfg.class_separation = 8.0;
  return generate_synthetic(cfg);
}

}  // namespace

TEST_SUITE("seen_classifier") {

TEST_CASE("init determinism, zero biases, fan-in bound") {
  const size_t dims[] = {4, 3, 3, 2};
  const MlpParams a = init_mlp(dims, 7);
  const MlpParams b = init_mlp(dims, 7);
  CHECK(a == b);
  for (const auto& l : a.layers)
    for (double bias : l.b) CHECK(bias == 0.0);

  const size_t big[] = {64, 512, 512, 5};
  const MlpParams p = init_mlp(big, 3);
  for (const auto& l : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim()));
    double maxabs = 0.0;
    for (size_t i = 0; i < l.w.size(); ++i) maxabs = std::max(maxabs, std::abs(l.w.data()[i]));
    CHECK(maxabs <= bound);
    CHECK(maxabs > 0.5 * bound);  // actually fills the range
  }
  const size_t zero_dim[] = {4, 0, 2};
  CHECK_THROWS_AS(init_mlp(zero_dim, 1), ValidationError);
}

TEST_CASE("forward: zero params give zero logits; matches naive oracle") {
  const size_t dims[] = {5, 4, 4, 3};
  MlpParams zero = init_mlp(dims, 1);
  for (auto& l : zero.layers)
    for (size_t i = 0; i < l.w.size(); ++i) l.w.data()[i] = 0.0;
  const std::vector<double> x{1.0, -2.0, 3.0, 0.5, -0.25};
  for (double v : mlp_forward(zero, x)) CHECK(v == 0.0);

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpParams p = random_params(dims, 100 + trial);
    std::vector<double> input(5);
    for (double& v : input) v = rng.normal();
    const std::vector<double> got = mlp_forward(p, input);
    const std::vector<double> want = naive_forward(p, input);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mlp_forward(zero, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("cross_entropy values and invariances") {
  CHECK(cross_entropy(std::vector<double>{1.0, 1.0, 1.0, 1.0}, 0) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(cross_entropy(std::vector<double>{100.0, 0.0}, 0) == doctest::Approx(0.0).epsilon(1e-12));
  const double direct = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 1.0;
  CHECK(cross_entropy(std::vector<double>{1.0, 2.0, 3.0}, 0) ==
        doctest::Approx(direct).epsilon(1e-14));
  CHECK(cross_entropy(std::vector<double>{1.0, 2.0, 3.0}, 0) ==
        doctest::Approx(2.407606).epsilon(1e-6));
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{1.0}, 1), ValidationError);

  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(2 + rng.index(6));
    for (double& v : logits) v = rng.uniform(-10.0, 10.0);
    const size_t label = rng.index(logits.size());
    const double base = cross_entropy(logits, label);
    CHECK(base >= 0.0);
    const double c = rng.uniform(-20.0, 20.0);
    std::vector<double> shifted = logits;
    for (double& v : shifted) v += c;
    CHECK(cross_entropy(shifted, label) == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("predict_seen argmax with lowest-index ties") {
  const size_t dims[] = {3, 3};
  MlpParams p = init_mlp(dims, 1);
  for (size_t i = 0; i < p.layers[0].w.size(); ++i) p.layers[0].w.data()[i] = 0.0;
  p.layers[0].b = {3.0, 1.0, 2.0};
  CHECK(predict_seen(p, std::vector<double>{0, 0, 0}) == 0);
  p.layers[0].b = {5.0, 5.0, 1.0};
  CHECK(predict_seen(p, std::vector<double>{0, 0, 0}) == 0);
  p.layers[0].b = {1.0, 5.0, 5.0};
  CHECK(predict_seen(p, std::vector<double>{0, 0, 0}) == 1);
  // Shift invariance.
  p.layers[0].b = {0.4, 2.2, -1.0};
  const size_t before = predict_seen(p, std::vector<double>{0, 0, 0});
  for (double& b : p.layers[0].b) b += 17.5;
  CHECK(predict_seen(p, std::vector<double>{0, 0, 0}) == before);
}

TEST_CASE("analytic gradient matches central differences") {
  const size_t dims[] = {6, 5, 4, 3};
  Rng rng(55);
  Matrix xs(5, 6);
  for (size_t i = 0; i < xs.size(); ++i) xs.data()[i] = rng.normal();
  std::vector<uint32_t> labels{0, 2, 1, 2, 0};

  for (uint64_t seed : {11u, 22u, 33u}) {
    MlpParams p = random_params(dims, seed);
    std::vector<double> grad;
    mlp_loss_and_grad(p, xs, labels, &grad);
    const std::vector<double> point = mlp_pack(p);
    MlpParams scratch = p;
    auto f = [&](std::span<const double> theta) {
      mlp_unpack(theta, scratch);
      return mlp_loss_and_grad(scratch, xs, labels, nullptr);
    };
    CHECK(grad_check(f, grad, point, 1e-5) < 1e-5);
    // Negative control: a scaled gradient must be flagged.
    std::vector<double> wrong = grad;
    for (double& g : wrong) g *= 2.0;
    CHECK(grad_check(f, wrong, point, 1e-5) > 1e-3);
  }
}

TEST_CASE("training: epochs 0 returns init, separable data reaches 100%") {
  const GeneratedData g = two_class_data();
  const SplitViews v = split_views(g.dataset);
  TrainConfig tc;
  tc.hidden1 = 32;
  tc.hidden2 = 32;
  tc.epochs = 0;
  const MlpTrainResult frozen = train_seen(g.dataset, v.train_seen, tc);
  const size_t dims[] = {g.dataset.dim(), tc.hidden1, tc.hidden2, 2};
  MlpParams expected = init_mlp(dims, tc.seed);
  expected.seen_class_ids = frozen.params.seen_class_ids;
  expected.trained_with = tc;
  CHECK(frozen.params == expected);
  CHECK(frozen.epoch_loss.empty());

  tc.epochs = 20;
  const MlpTrainResult r = train_seen(g.dataset, v.train_seen, tc);
  CHECK(r.epoch_loss.size() == 20);
  size_t correct = 0;
  for (uint32_t idx : v.train_seen) {
    const size_t dense = predict_seen(r.params, g.dataset.features.row(idx));
    if (r.params.seen_class_ids[dense] == g.dataset.labels[idx]) ++correct;
  }
  CHECK(correct == v.train_seen.size());

  // Determinism: identical (dataset, cfg) give bit-identical parameters.
  const MlpTrainResult again = train_seen(g.dataset, v.train_seen, tc);
  CHECK(again.params == r.params);
  CHECK(again.epoch_loss == r.epoch_loss);
}

TEST_CASE("training loss is non-increasing over any 5-epoch window") {
  SynthConfig cfg = SynthConfig::small_profile();
  const GeneratedData g = generate_synthetic(cfg);
  const SplitViews v = split_views(g.dataset);
  TrainConfig tc;
  tc.epochs = 30;
  const MlpTrainResult r = train_seen(g.dataset, v.train_seen, tc);
  REQUIRE(r.epoch_loss.size() == 30);
  for (size_t i = 0; i + 5 < r.epoch_loss.size(); ++i)
    CHECK(r.epoch_loss[i + 5] <= r.epoch_loss[i]);
}

TEST_CASE("zero-shot hygiene at the trainer entry point") {
  const GeneratedData g = two_class_data();
  const SplitViews v = split_views(g.dataset);
  std::vector<uint32_t> poisoned(v.train_seen.begin(), v.train_seen.end());
  poisoned.push_back(v.test_unseen.front());
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train_seen(g.dataset, poisoned, tc), HygieneError);
  CHECK_THROWS_AS(train_seen(g.dataset, std::vector<uint32_t>{}, tc), ValidationError);
}

TEST_CASE("checkpoint round-trip is bit-exact; corrupted magic reports offset") {
  const size_t dims[] = {5, 4, 4, 3};
  MlpParams p = random_params(dims, 42);
  p.seen_class_ids = {0, 2, 5};
  std::ostringstream out(std::ios::binary);
  save_mlp(out, p);
  const std::string bytes = out.str();
  std::istringstream in(bytes, std::ios::binary);
  const MlpParams back = load_mlp(in);
  CHECK(back == p);
  std::ostringstream out2(std::ios::binary);
  save_mlp(out2, back);
  CHECK(out2.str() == bytes);

  std::string corrupted = bytes;
  corrupted[2] = 'x';
  std::istringstream bad(corrupted, std::ios::binary);
  try {
    load_mlp(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
}

}  // TEST_SUITE
