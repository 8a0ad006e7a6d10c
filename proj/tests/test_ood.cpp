#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dataset.hpp"
#include "errors.hpp"
#include "mlp.hpp"
#include "ood.hpp"
#include "rng.hpp"

using namespace avood;

namespace {

Matrix random_features(Rng& rng, size_t m, size_t d) {
  Matrix x(m, d);
  for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

}  // namespace

TEST_SUITE("ood") {

TEST_CASE("rank-1 data: residual basis spans the complement exactly") {
  // All rows parallel to e1 in D=2; with n=1 the residual basis must be e2.
  Matrix x(3, 2);
  x(0, 0) = 1.0;
  x(1, 0) = -2.0;
  x(2, 0) = 0.5;
  const SubspaceModel m = fit_subspace(x, 1);
  CHECK(m.residual_basis.rows() == 2);
  CHECK(m.residual_basis.cols() == 1);
  CHECK(std::abs(m.residual_basis(0, 0)) < 1e-12);
  CHECK(m.residual_basis(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // x in the principal subspace scores zero.
  CHECK(residual_score(m, std::vector<double>{3.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
  // x orthogonal to it scores -|x|.
  CHECK(residual_score(m, std::vector<double>{0.0, -7.0}) == doctest::Approx(-7.0));
}

TEST_CASE("diagonal-Gram hand example: score is exactly -4") {
  // Rows (sqrt(2), 0) and (0, 0.1) give Gram diag(2, 0.01); n=1 keeps e1 as
  // the principal direction, so x=(3,4) projects to 4 on the residual axis.
  Matrix x(2, 2);
  x(0, 0) = std::sqrt(2.0);
  x(1, 1) = 0.1;
  const SubspaceModel m = fit_subspace(x, 1);
  const double r = residual_score(m, std::vector<double>{3.0, 4.0});
  CHECK(std::abs(r - (-4.0)) < 1e-12);
}

TEST_CASE("boundary n = D-1 leaves a single residual column") {
  Rng rng(3);
  const Matrix x = random_features(rng, 10, 6);
  const SubspaceModel m = fit_subspace(x, 5);
  CHECK(m.residual_basis.cols() == 1);
  CHECK_THROWS_AS(fit_subspace(x, 6), ValidationError);
  CHECK_THROWS_AS(fit_subspace(x, 0), ValidationError);
  Matrix tiny(1, 4, 1.0);
  CHECK_THROWS_AS(fit_subspace(tiny, 1), ValidationError);
}

TEST_CASE("Pythagorean identity and projection idempotence") {
  Rng rng(17);
  const Matrix x = random_features(rng, 40, 24);
  const SubspaceSpectrum spec = fit_spectrum(x);
  const SubspaceModel m = slice_subspace(spec, 7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(24);
    for (double& e : v) e = rng.normal() * rng.uniform(0.1, 10.0);
    const double norm_sq = dot(v, v);
    // ||Q'x||^2 via the full basis: principal columns 0..6.
    double principal_sq = 0.0;
    for (size_t j = 0; j < 7; ++j) {
      double c = 0.0;
      for (size_t k = 0; k < 24; ++k) c += spec.eig.eigenvectors(k, j) * v[k];
      principal_sq += c * c;
    }
    const double res = residual_score(m, v);
    CHECK(std::abs(norm_sq - (principal_sq + res * res)) <= 1e-9 * std::max(1.0, norm_sq));

    // Projecting twice changes nothing: score of O·O'v equals the score of v.
    const std::vector<double> coords = matvec_transposed(m.residual_basis, v);
    const std::vector<double> back = matvec(m.residual_basis, coords);
    CHECK(residual_score(m, back) ==
          doctest::Approx(res).epsilon(1e-9));
  }
  // Vectors inside the principal span score zero.
  for (size_t j = 0; j < 7; ++j) {
    std::vector<double> v(24);
    for (size_t k = 0; k < 24; ++k) v[k] = spec.eig.eigenvectors(k, j) * 3.5;
    CHECK(std::abs(residual_score(m, v)) < 1e-9);
  }
  CHECK_THROWS_AS(residual_score(m, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("sliced subspace equals a fresh fit at the same dimension") {
  Rng rng(29);
  const Matrix x = random_features(rng, 30, 16);
  const SubspaceSpectrum spec = fit_spectrum(x);
  const SubspaceModel sliced = slice_subspace(spec, 5);
  const SubspaceModel fresh = fit_subspace(x, 5);
  CHECK(sliced.residual_basis == fresh.residual_basis);
  CHECK(sliced.eigenvalues == fresh.eigenvalues);
}

TEST_CASE("energy and msp scores") {
  CHECK(energy_score(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)));
  const double base = energy_score(std::vector<double>{1.0, 2.0, 3.0});
  const double direct = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(base == doctest::Approx(direct).epsilon(1e-14));
  CHECK(energy_score(std::vector<double>{1001.0, 1002.0, 1003.0}) ==
        doctest::Approx(base + 1000.0));
  CHECK_THROWS_AS(energy_score(std::vector<double>{}), ValidationError);

  CHECK(msp_score(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.5));
  CHECK(msp_score(std::vector<double>{100.0, 0.0}) == doctest::Approx(1.0));
  const double direct_msp = std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(msp_score(std::vector<double>{1.0, 2.0, 3.0}) ==
        doctest::Approx(direct_msp).epsilon(1e-12));
  CHECK(msp_score(std::vector<double>{1.0, 2.0, 3.0}) ==
        doctest::Approx(0.665241).epsilon(1e-6));
  // Shift invariance.
  CHECK(msp_score(std::vector<double>{501.0, 502.0, 503.0}) ==
        doctest::Approx(direct_msp).epsilon(1e-12));
}

TEST_CASE("combined score arithmetic") {
  CHECK(combined_score(5.0, -2.0, 0.0) == 5.0);
  CHECK(combined_score(5.0, -2.0, 2.0) == 1.0);
  CHECK(combined_score(5.0, -2.0, 90.0) == 5.0 + 90.0 * -2.0);
  CHECK_THROWS_AS(combined_score(5.0, -2.0, -1.0), ValidationError);
  CHECK_THROWS_AS(combined_score(std::numeric_limits<double>::infinity(), 0.0, 1.0),
                  ValidationError);
}

TEST_CASE("threshold calibration: interpolated percentile") {
  std::vector<double> scores;
  for (int i = 1; i <= 100; ++i) scores.push_back(static_cast<double>(i));
  CHECK(calibrate_threshold(scores, 5.0) == doctest::Approx(5.95).epsilon(1e-12));
  CHECK(calibrate_threshold(std::vector<double>{7.0, 7.0, 7.0}, 30.0) == 7.0);
  CHECK(calibrate_threshold(std::vector<double>{0.0, 10.0}, 50.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 5.0), ValidationError);
  CHECK_THROWS_AS(calibrate_threshold(scores, 0.0), ValidationError);
  CHECK_THROWS_AS(calibrate_threshold(scores, 100.0), ValidationError);
}

TEST_CASE("detection rule: boundary inclusive, monotone in lambda") {
  CHECK(detect(1.0, 1.0) == Verdict::seen);
  CHECK(detect(1.0 - 1e-12, 1.0) == Verdict::unseen);
  CHECK(detect(2.0, 1.0) == Verdict::seen);
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double s = rng.uniform(-10.0, 10.0);
    const double lo = rng.uniform(-10.0, 10.0);
    const double hi = lo + rng.uniform(0.0, 5.0);
    // Raising the threshold never converts Unseen to Seen.
    if (detect(s, lo) == Verdict::unseen) CHECK(detect(s, hi) == Verdict::unseen);
  }
}

TEST_CASE("detector bundle round-trip and checkpoint hash") {
  SynthConfig cfg = SynthConfig::small_profile();
  cfg.dim_feature = 12;
  cfg.dim_text = 6;
  cfg.samples_per_class_train = 6;
  cfg.samples_per_class_test = 2;
  const GeneratedData g = generate_synthetic(cfg);
  const SplitViews v = split_views(g.dataset);
  TrainConfig tc;
  tc.hidden1 = 8;
  tc.hidden2 = 8;
  tc.epochs = 2;
  const MlpTrainResult trained = train_seen(g.dataset, v.train_seen, tc);

  Matrix train_x(v.train_seen.size(), g.dataset.dim());
  for (size_t i = 0; i < v.train_seen.size(); ++i)
    std::copy_n(g.dataset.features.row(v.train_seen[i]).data(), g.dataset.dim(),
                train_x.row(i).data());
  const Detector det = fit_detector(train_x, trained.params, 4, 90.0, 5.0);
  CHECK(det.config.threshold ==
        doctest::Approx(det.config.threshold));  // finite, calibrated
  CHECK(det.mlp_hash == mlp_content_hash(trained.params));

  std::ostringstream out(std::ios::binary);
  save_detector(out, det);
  const std::string bytes = out.str();
  std::istringstream in(bytes, std::ios::binary);
  const Detector back = load_detector(in);
  CHECK(back.subspace.residual_basis == det.subspace.residual_basis);
  CHECK(back.subspace.eigenvalues == det.subspace.eigenvalues);
  CHECK(back.config.gamma == det.config.gamma);
  CHECK(back.config.threshold == det.config.threshold);
  CHECK(back.config.principal_dim == det.config.principal_dim);
  CHECK(back.mlp_hash == det.mlp_hash);
  std::ostringstream out2(std::ios::binary);
  save_detector(out2, back);
  CHECK(out2.str() == bytes);

  std::string corrupted = bytes;
  corrupted[0] = 'Z';
  std::istringstream bad(corrupted, std::ios::binary);
  try {
    load_detector(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  // Training-seen acceptance rate ~ 1 - p/100 by construction.
  size_t accepted = 0;
  for (size_t i = 0; i < train_x.rows(); ++i) {
    const ScoreBreakdown b = score_breakdown(det, trained.params, train_x.row(i));
    CHECK(b.combined == b.energy + det.config.gamma * b.residual);
    if (detect(b.combined, det.config.threshold) == Verdict::seen) ++accepted;
  }
  const double rate = static_cast<double>(accepted) / static_cast<double>(train_x.rows());
  // p = 5 targets 95% acceptance; with n = 30 the interpolated percentile
  // cuts at most two samples more than the ideal count.
  CHECK(rate >= 0.95 - 2.0 / static_cast<double>(train_x.rows()));
}

TEST_CASE("centered subspace keeps the Pythagorean identity on shifted data") {
  Rng rng(41);
  Matrix x = random_features(rng, 50, 10);
  for (size_t i = 0; i < x.rows(); ++i)
    for (size_t j = 0; j < x.cols(); ++j) x(i, j) += 5.0;  // constant offset
  const SubspaceSpectrum spec = fit_spectrum(x, true);
  const SubspaceModel m = slice_subspace(spec, 3);
  CHECK(m.centered);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(10);
    for (double& e : v) e = rng.normal() + 5.0;
    std::vector<double> shifted(v);
    for (size_t k = 0; k < 10; ++k) shifted[k] -= m.mean[k];
    const double norm_sq = dot(shifted, shifted);
    double principal_sq = 0.0;
    for (size_t j = 0; j < 3; ++j) {
      double c = 0.0;
      for (size_t k = 0; k < 10; ++k) c += spec.eig.eigenvectors(k, j) * shifted[k];
      principal_sq += c * c;
    }
    const double res = residual_score(m, v);
    CHECK(std::abs(norm_sq - (principal_sq + res * res)) <= 1e-9 * std::max(1.0, norm_sq));
  }
}

}  // TEST_SUITE
