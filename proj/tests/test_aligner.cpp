#include <doctest.h>

#include <cmath>
#include <sstream>

#include "aligner.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "rng.hpp"

using namespace avood;

namespace {

AlignerConfig tiny_config() {
  AlignerConfig cfg;
  cfg.embed_dim = 4;
  cfg.proj_dim = 3;
  return cfg;
}

AlignerParams random_aligner(size_t d, size_t dt, const AlignerConfig& cfg, uint64_t seed) {
  AlignerConfig c = cfg;
  c.seed = seed;
  AlignerParams p = init_aligner(d, dt, c);
  Rng rng(seed ^ 0x5555);
  for (AffineLayer* l : {&p.sample_encoder, &p.text_encoder, &p.sample_projector,
                         &p.text_projector, &p.sample_decoder, &p.text_decoder})
    for (double& b : l->b) b = 0.2 * rng.normal();
  return p;
}

// Identity-configured linear stack: square layers, identity weights, zero
// biases, so the projection of a nonnegative input is the input itself.
AlignerParams identity_aligner(size_t d) {
  AlignerConfig cfg;
  cfg.embed_dim = static_cast<uint32_t>(d);
  cfg.proj_dim = static_cast<uint32_t>(d);
  AlignerParams p = init_aligner(d, d, cfg);
  for (AffineLayer* l : {&p.sample_encoder, &p.text_encoder, &p.sample_projector,
                         &p.text_projector, &p.sample_decoder, &p.text_decoder}) {
    for (size_t i = 0; i < d; ++i)
      for (size_t j = 0; j < d; ++j) l->w(i, j) = i == j ? 1.0 : 0.0;
  }
  return p;
}

}  // namespace

TEST_SUITE("unseen_classifier") {

TEST_CASE("encoders: zero params, identity stack, straight-line oracle") {
  AlignerParams zero = init_aligner(5, 4, tiny_config());
  for (AffineLayer* l : {&zero.sample_encoder, &zero.text_encoder, &zero.sample_projector,
                         &zero.text_projector, &zero.sample_decoder, &zero.text_decoder})
    for (size_t i = 0; i < l->w.size(); ++i) l->w.data()[i] = 0.0;
  const EncodeOut es = encode_sample(zero, std::vector<double>{1, 2, 3, 4, 5});
  for (double v : es.encoded) CHECK(v == 0.0);
  for (double v : es.projected) CHECK(v == 0.0);
  for (double v : es.reconstructed) CHECK(v == 0.0);
  const EncodeOut et = encode_text(zero, std::vector<double>{1, 2, 3, 4});
  for (double v : et.projected) CHECK(v == 0.0);

  const AlignerParams ident = identity_aligner(3);
  const std::vector<double> x{0.5, 2.0, 0.0};
  const EncodeOut e = encode_sample(ident, x);
  for (size_t i = 0; i < 3; ++i) CHECK(e.projected[i] == x[i]);

  // Straight-line oracle for one random configuration.
  Rng rng(4);
  const AlignerParams p = random_aligner(5, 4, tiny_config(), 17);
  std::vector<double> input(5);
  for (double& v : input) v = rng.normal();
  const EncodeOut got = encode_sample(p, input);
  std::vector<double> enc(p.embed_dim());
  for (size_t i = 0; i < p.embed_dim(); ++i) {
    double acc = p.sample_encoder.b[i];
    for (size_t j = 0; j < 5; ++j) acc += p.sample_encoder.w(i, j) * input[j];
    enc[i] = acc > 0.0 ? acc : 0.0;
  }
  for (size_t i = 0; i < p.proj_dim(); ++i) {
    double acc = p.sample_projector.b[i];
    for (size_t j = 0; j < p.embed_dim(); ++j) acc += p.sample_projector.w(i, j) * enc[j];
    CHECK(got.projected[i] == doctest::Approx(acc).epsilon(1e-12));
  }
  CHECK_THROWS_AS(encode_sample(p, std::vector<double>{1.0}), ValidationError);
  CHECK_THROWS_AS(encode_text(p, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("loss_xe: uniform similarities, confident case, hand value") {
  Matrix theta_o(2, 3, 0.5);
  Matrix theta_w(4, 3, 0.25);  // all classes identical
  const std::vector<uint32_t> labels{0, 2};
  CHECK(loss_xe(theta_o, theta_w, labels) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // True-class dot far above the rest.
  Matrix to(1, 2);
  to(0, 0) = 10.0;
  Matrix tw(3, 2);
  tw(0, 0) = 10.0;  // dot 100 for class 0
  tw(1, 0) = -1.0;
  tw(2, 1) = 1.0;
  CHECK(loss_xe(to, tw, std::vector<uint32_t>{0}) == doctest::Approx(0.0).epsilon(1e-10));

  // Two classes with dots (1, 2), true class 0: lse([1,2]) - 1.
  Matrix to2(1, 1);
  to2(0, 0) = 1.0;
  Matrix tw2(2, 1);
  tw2(0, 0) = 1.0;
  tw2(1, 0) = 2.0;
  const double expected = std::log(std::exp(1.0) + std::exp(2.0)) - 1.0;
  CHECK(loss_xe(to2, tw2, std::vector<uint32_t>{0}) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK(loss_xe(to2, tw2, std::vector<uint32_t>{0}) == doctest::Approx(1.313262).epsilon(1e-6));
  CHECK_THROWS_AS(loss_xe(to2, tw2, std::vector<uint32_t>{5}), ValidationError);
}

TEST_CASE("loss_rec and loss_reg: zero, unit offset, naive oracle") {
  Matrix w(3, 4, 0.7), rho_o(3, 4, 0.7), rho_w(3, 4, 0.7);
  CHECK(loss_rec(rho_o, rho_w, w) == 0.0);
  CHECK(loss_reg(rho_o, rho_w) == 0.0);

  Matrix rho_o1 = w;
  for (size_t i = 0; i < rho_o1.size(); ++i) rho_o1.data()[i] += 1.0;
  CHECK(loss_rec(rho_o1, w, w) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(loss_reg(rho_o1, w) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(12);
  Matrix a(5, 6), b(5, 6), c(5, 6);
  for (size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = rng.normal();
    b.data()[i] = rng.normal();
    c.data()[i] = rng.normal();
  }
  double want = 0.0;
  for (size_t i = 0; i < 5; ++i) {
    double sa = 0.0, sb = 0.0;
    for (size_t j = 0; j < 6; ++j) {
      sa += (a(i, j) - c(i, j)) * (a(i, j) - c(i, j));
      sb += (b(i, j) - c(i, j)) * (b(i, j) - c(i, j));
    }
    want += sa / 6.0 + sb / 6.0;
  }
  want /= 5.0;
  CHECK(loss_rec(a, b, c) == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(loss_rec(a, b, Matrix(5, 3)), ValidationError);
  CHECK_THROWS_AS(loss_reg(a, Matrix(4, 6)), ValidationError);
}

TEST_CASE("analytic gradients match central differences for every term") {
  const size_t d = 5, dt = 4, n = 4, n_classes = 3;
  Rng rng(66);
  Matrix xs(n, d);
  for (size_t i = 0; i < xs.size(); ++i) xs.data()[i] = rng.normal();
  Matrix text(n_classes, dt);
  for (size_t i = 0; i < text.size(); ++i) text.data()[i] = rng.normal();
  const std::vector<uint32_t> labels{0, 2, 1, 0};

  struct Selection {
    bool xe, rec, reg;
  };
  const Selection selections[] = {{true, false, false},
                                  {false, true, false},
                                  {false, false, true},
                                  {true, true, true}};
  for (uint64_t seed : {101u, 202u, 303u}) {
    AlignerParams p = random_aligner(d, dt, tiny_config(), seed);
    for (const Selection& sel : selections) {
      std::vector<double> grad;
      aligner_loss_and_grad(p, xs, labels, text, sel.xe, sel.rec, sel.reg, &grad);
      const std::vector<double> point = aligner_pack(p);
      AlignerParams scratch = p;
      auto f = [&](std::span<const double> theta) {
        aligner_unpack(theta, scratch);
        const AlignerLossTerms t =
            aligner_loss_and_grad(scratch, xs, labels, text, sel.xe, sel.rec, sel.reg, nullptr);
        return t.total();
      };
      CHECK(grad_check(f, grad, point, 1e-5) < 1e-5);
    }
  }
}

TEST_CASE("loss terms are nonnegative and nearly zero only when matched") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const AlignerParams p = random_aligner(5, 4, tiny_config(), 500 + trial);
    Matrix xs(3, 5);
    for (size_t i = 0; i < xs.size(); ++i) xs.data()[i] = rng.normal();
    Matrix text(2, 4);
    for (size_t i = 0; i < text.size(); ++i) text.data()[i] = rng.normal();
    const std::vector<uint32_t> labels{0, 1, 0};
    const AlignerLossTerms t =
        aligner_loss_and_grad(p, xs, labels, text, true, true, true, nullptr);
    CHECK(t.xe >= 0.0);
    CHECK(t.rec >= 0.0);
    CHECK(t.reg >= 0.0);
    CHECK(t.total() >= 0.0);
  }
}

TEST_CASE("training: epochs 0 returns init; loss halves on the default profile") {
  SynthConfig scfg = SynthConfig::small_profile();
  const GeneratedData g = generate_synthetic(scfg);
  const SplitViews v = split_views(g.dataset);

  AlignerConfig cfg;
  cfg.embed_dim = 128;
  cfg.proj_dim = 32;
  cfg.epochs = 0;
  const AlignerTrainResult frozen = train_unseen(g.dataset, v.train_seen, g.embeddings, cfg);
  AlignerConfig icfg = cfg;
  const AlignerParams expected = init_aligner(g.dataset.dim(), g.embeddings.dim(), icfg);
  CHECK(frozen.params == expected);

  cfg.epochs = 30;
  const AlignerTrainResult r = train_unseen(g.dataset, v.train_seen, g.embeddings, cfg);
  REQUIRE(r.epoch_loss.size() == 30);
  CHECK(r.epoch_loss.back() <= 0.5 * r.epoch_loss.front());

  // Determinism.
  const AlignerTrainResult again = train_unseen(g.dataset, v.train_seen, g.embeddings, cfg);
  CHECK(again.params == r.params);
  CHECK(again.epoch_loss == r.epoch_loss);
}

TEST_CASE("training hygiene: unseen samples are rejected") {
  SynthConfig scfg = SynthConfig::small_profile();
  scfg.samples_per_class_train = 3;
  scfg.samples_per_class_test = 2;
  const GeneratedData g = generate_synthetic(scfg);
  const SplitViews v = split_views(g.dataset);
  std::vector<uint32_t> poisoned(v.train_seen.begin(), v.train_seen.end());
  poisoned.push_back(v.test_unseen.front());
  AlignerConfig cfg = tiny_config();
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_unseen(g.dataset, poisoned, g.embeddings, cfg), HygieneError);
}

TEST_CASE("predict_nn: exact match, ties, hand distances, shift invariance") {
  const AlignerParams ident = identity_aligner(2);
  Matrix candidates(3, 2);
  candidates(0, 0) = 2.0;  // distance 2 from origin
  candidates(1, 0) = 1.0;  // distance 1
  candidates(2, 0) = 5.0;  // distance 5
  const std::vector<double> x{0.0, 0.0};
  CHECK(predict_nn(ident, x, candidates) == 1);

  // Exact match wins.
  const std::vector<double> x2{5.0, 0.0};
  CHECK(predict_nn(ident, x2, candidates) == 2);

  // Equidistant candidates resolve to the lower index.
  Matrix tie(2, 2);
  tie(0, 0) = 1.0;
  tie(1, 1) = 1.0;
  CHECK(predict_nn(ident, x, tie) == 0);

  CHECK_THROWS_AS(predict_nn(ident, x, Matrix(0, 2)), ValidationError);

  // Adding the same vector to every candidate's projection and the sample's
  // projection (via the projector biases) leaves the argmin unchanged.
  AlignerParams shifted = ident;
  shifted.sample_projector.b = {3.0, -2.0};
  shifted.text_projector.b = {3.0, -2.0};
  CHECK(predict_nn(shifted, x, candidates) == 1);
  CHECK(predict_nn(shifted, x2, candidates) == 2);
  CHECK(predict_nn(shifted, x, tie) == 0);
}

TEST_CASE("checkpoint round-trip is bit-exact; corrupted magic reports offset") {
  AlignerParams p = random_aligner(6, 5, tiny_config(), 77);
  p.trained_with.normalize_projections = true;
  std::ostringstream out(std::ios::binary);
  save_aligner(out, p);
  const std::string bytes = out.str();
  std::istringstream in(bytes, std::ios::binary);
  const AlignerParams back = load_aligner(in);
  CHECK(back == p);
  std::ostringstream out2(std::ios::binary);
  save_aligner(out2, back);
  CHECK(out2.str() == bytes);

  std::string corrupted = bytes;
  corrupted[5] = '9';
  std::istringstream bad(corrupted, std::ios::binary);
  try {
    load_aligner(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
}

}  // TEST_SUITE
