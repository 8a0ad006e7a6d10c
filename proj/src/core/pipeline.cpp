#include "pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "errors.hpp"
#include "feature_io.hpp"
#include "metrics.hpp"

namespace avood {

namespace {

GeneratedData obtain_data(const PipelineConfig& cfg, bool* generated) {
  GeneratedData g;
  if (cfg.synth) {
    SynthConfig sc = *cfg.synth;
    sc.seed = cfg.seed;
    g = generate_synthetic(sc);
    *generated = true;
  } else {
    if (cfg.dataset_path.empty())
      throw ValidationError("pipeline: configure either a synthetic profile or a dataset path");
    g = load_features(cfg.dataset_path);
    *generated = false;
  }
  if (cfg.l2_normalize) l2_normalize_features(g.dataset);
  return g;
}

uint32_t resolve_principal_dim(uint32_t requested, size_t d) {
  uint32_t n = requested;
  if (n == 0) n = static_cast<uint32_t>(std::max<size_t>(1, std::min<size_t>(64, d / 4)));
  if (n >= d) throw ValidationError("detector: principal dim must satisfy 1 <= N < D");
  return n;
}

std::vector<double> combine(const std::vector<double>& energy,
                            const std::vector<double>& residual, double gamma) {
  std::vector<double> out(energy.size());
  for (size_t i = 0; i < energy.size(); ++i)
    out[i] = combined_score(energy[i], residual[i], gamma);
  return out;
}

std::string hash_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, h);
  return buf;
}

template <typename SaveFn>
uint64_t serialized_hash(const SaveFn& save) {
  std::ostringstream buf(std::ios::binary);
  save(buf);
  const std::string bytes = buf.str();
  return fnv1a(bytes.data(), bytes.size());
}

nlohmann::ordered_json config_echo(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["mode"] = cfg.mode == PipelineMode::gzsl ? "gzsl" : "zsl";
  if (cfg.synth) {
    const SynthConfig& s = *cfg.synth;
    j["dataset"] = {{"source", "synthetic"},
                    {"n_seen_classes", s.n_seen_classes},
                    {"n_unseen_classes", s.n_unseen_classes},
                    {"dim_feature", s.dim_feature},
                    {"dim_text", s.dim_text},
                    {"samples_per_class_train", s.samples_per_class_train},
                    {"samples_per_class_test", s.samples_per_class_test},
                    {"class_separation", s.class_separation},
                    {"noise_scale", s.noise_scale}};
  } else {
    j["dataset"] = {{"source", cfg.dataset_path}};
  }
  j["l2_normalize"] = cfg.l2_normalize;
  j["seen_expert"] = {{"hidden", {cfg.seen_cfg.hidden1, cfg.seen_cfg.hidden2}},
                      {"learning_rate", cfg.seen_cfg.learning_rate},
                      {"beta1", cfg.seen_cfg.beta1},
                      {"beta2", cfg.seen_cfg.beta2},
                      {"epsilon", cfg.seen_cfg.epsilon},
                      {"batch_size", cfg.seen_cfg.batch_size},
                      {"epochs", cfg.seen_cfg.epochs}};
  j["unseen_expert"] = {{"name", cfg.unseen_expert},
                        {"embed_dim", cfg.unseen_cfg.embed_dim},
                        {"proj_dim", cfg.unseen_cfg.proj_dim},
                        {"learning_rate", cfg.unseen_cfg.learning_rate},
                        {"batch_size", cfg.unseen_cfg.batch_size},
                        {"epochs", cfg.unseen_cfg.epochs},
                        {"normalize_projections", cfg.unseen_cfg.normalize_projections}};
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_artifacts: cannot open " + path.string());
  out << text;
  if (!out.good()) throw DataError("write_artifacts: write failed for " + path.string());
}

std::string train_log_csv(const std::vector<double>& seen_loss,
                          const std::vector<double>& unseen_loss) {
  std::ostringstream out;
  out << "stage,epoch,loss\n";
  char buf[32];
  for (size_t e = 0; e < seen_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.17g", seen_loss[e]);
    out << "seen," << e << ',' << buf << "\n";
  }
  for (size_t e = 0; e < unseen_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.17g", unseen_loss[e]);
    out << "unseen," << e << ',' << buf << "\n";
  }
  return out.str();
}

}  // namespace

std::vector<double> default_gamma_grid() { return {0.1, 1.0, 10.0, 100.0, 250.0, 500.0, 1000.0}; }

ScoredStack prepare_stack_on(GeneratedData data, const TrainConfig& seen_cfg,
                             const DetectorSettings& det, uint64_t seed) {
  ScoredStack s;
  s.data = std::move(data);
  const Dataset& ds = s.data.dataset;
  s.views = split_views(ds);
  if (s.views.train_seen.empty())
    throw DataError("pipeline: no training samples in the dataset");
  if (s.views.test_seen.empty() || s.views.test_unseen.empty())
    throw DataError("pipeline: OOD evaluation requires test samples from both seen and unseen "
                    "classes");

  TrainConfig tc = seen_cfg;
  tc.seed = seed + 1;
  MlpTrainResult trained = train_seen(ds, s.views.train_seen, tc);
  s.mlp = std::move(trained.params);
  s.seen_epoch_loss = std::move(trained.epoch_loss);

  s.train_features = Matrix(s.views.train_seen.size(), ds.dim());
  for (size_t i = 0; i < s.views.train_seen.size(); ++i)
    std::copy_n(ds.features.row(s.views.train_seen[i]).data(), ds.dim(),
                s.train_features.row(i).data());

  s.spectrum = fit_spectrum(s.train_features, det.center);
  s.principal_dim = resolve_principal_dim(det.principal_dim, ds.dim());
  const SubspaceModel model = slice_subspace(s.spectrum, s.principal_dim);

  auto score_block = [&](const std::vector<uint32_t>& view, std::vector<double>& energy,
                         std::vector<double>& residual) {
    energy.reserve(view.size());
    residual.reserve(view.size());
    for (uint32_t idx : view) {
      const auto x = ds.features.row(idx);
      energy.push_back(energy_score(mlp_forward(s.mlp, x)));
      residual.push_back(residual_score(model, x));
    }
  };
  score_block(s.views.test_seen, s.test_seen_energy, s.test_seen_residual);
  score_block(s.views.test_unseen, s.test_unseen_energy, s.test_unseen_residual);
  return s;
}

ScoredStack prepare_stack(const PipelineConfig& cfg) {
  bool generated = false;
  GeneratedData data = obtain_data(cfg, &generated);
  ScoredStack s = prepare_stack_on(std::move(data), cfg.seen_cfg, cfg.detector, cfg.seed);
  s.generated = generated;
  return s;
}

double resolve_gamma(const ScoredStack& stack, const DetectorSettings& det) {
  if (det.gamma >= 0.0) return det.gamma;
  const std::vector<GammaRow> rows = sweep_gamma(stack, default_gamma_grid());
  size_t best = 0;
  for (size_t i = 1; i < rows.size(); ++i)
    if (rows[i].auroc_combined > rows[best].auroc_combined) best = i;
  return rows[best].gamma;
}

std::vector<GammaRow> sweep_gamma(const ScoredStack& stack, std::vector<double> grid) {
  if (grid.empty()) throw ValidationError("sweep_gamma: empty grid");
  std::vector<double> effective{0.0};
  for (double g : grid) {
    if (!std::isfinite(g) || g < 0.0)
      throw ValidationError("sweep_gamma: gamma values must be finite and >= 0");
    if (std::find(effective.begin(), effective.end(), g) == effective.end())
      effective.push_back(g);
  }
  std::vector<GammaRow> rows;
  rows.reserve(effective.size());
  for (double g : effective) {
    GammaRow row;
    row.gamma = g;
    row.auroc_combined = auroc(combine(stack.test_seen_energy, stack.test_seen_residual, g),
                               combine(stack.test_unseen_energy, stack.test_unseen_residual, g));
    rows.push_back(row);
  }
  return rows;
}

std::vector<GammaRow> sweep_gamma(const PipelineConfig& cfg, const std::vector<double>& grid) {
  return sweep_gamma(prepare_stack(cfg), grid);
}

std::vector<DimRow> sweep_dim(const ScoredStack& stack, double gamma,
                              const std::vector<uint32_t>& grid) {
  if (grid.empty()) throw ValidationError("sweep_dim: empty grid");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw ValidationError("sweep_dim: gamma must be finite and >= 0");
  const Dataset& ds = stack.data.dataset;
  std::vector<DimRow> rows;
  for (uint32_t n : grid) {
    DimRow row;
    row.principal_dim = n;
    if (n < 1 || n >= ds.dim()) {
      row.auroc_combined = std::numeric_limits<double>::quiet_NaN();
      row.error = "principal dim must satisfy 1 <= N < D";
      rows.push_back(row);
      continue;
    }
    const SubspaceModel model = slice_subspace(stack.spectrum, n);
    auto residuals = [&](const std::vector<uint32_t>& view) {
      std::vector<double> r;
      r.reserve(view.size());
      for (uint32_t idx : view) r.push_back(residual_score(model, ds.features.row(idx)));
      return r;
    };
    row.auroc_combined =
        auroc(combine(stack.test_seen_energy, residuals(stack.views.test_seen), gamma),
              combine(stack.test_unseen_energy, residuals(stack.views.test_unseen), gamma));
    rows.push_back(row);
  }
  return rows;
}

std::vector<DimRow> sweep_dim(const PipelineConfig& cfg, const std::vector<uint32_t>& grid) {
  const ScoredStack stack = prepare_stack(cfg);
  return sweep_dim(stack, resolve_gamma(stack, cfg.detector), grid);
}

std::string gamma_table_csv(const std::vector<GammaRow>& rows) {
  std::ostringstream out;
  out << "gamma,auroc\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.gamma);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.auroc_combined);
    out << buf << "\n";
  }
  return out.str();
}

std::string dim_table_csv(const std::vector<DimRow>& rows) {
  std::ostringstream out;
  out << "principal_dim,auroc,error\n";
  char buf[32];
  for (const auto& r : rows) {
    out << r.principal_dim << ',';
    if (r.error.empty()) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.auroc_combined);
      out << buf;
    }
    out << ',' << r.error << "\n";
  }
  return out.str();
}

EvalResult evaluate_gzsl(const Dataset& ds, const MlpParams& mlp, const Detector& det,
                         const UnseenExpert& expert) {
  ds.validate();
  if (ds.dim() != mlp.input_dim())
    throw ValidationError("evaluate_gzsl: feature dim disagrees with MLP input dim");
  if (ds.dim() != det.subspace.dim())
    throw ValidationError("evaluate_gzsl: feature dim disagrees with detector dim");
  const SplitViews views = split_views(ds);
  if (views.test_seen.empty() || views.test_unseen.empty())
    throw DataError("evaluate_gzsl: requires test samples from both seen and unseen classes");

  const std::vector<uint32_t> seen_ids = ds.seen_class_ids();
  const std::vector<uint32_t> unseen_ids = ds.unseen_class_ids();
  const double lambda = det.config.threshold;

  EvalResult r;
  std::vector<size_t> class_n(ds.num_classes(), 0), class_correct(ds.num_classes(), 0);
  std::vector<double> seen_combined, unseen_combined;
  auto route_block = [&](const std::vector<uint32_t>& view, bool true_seen,
                         std::vector<double>& combined_out, std::vector<uint32_t>& preds,
                         std::vector<uint32_t>& labels) {
    preds.reserve(view.size());
    labels.reserve(view.size());
    combined_out.reserve(view.size());
    for (uint32_t idx : view) {
      const auto x = ds.features.row(idx);
      const ScoreBreakdown b = score_breakdown(det, mlp, x);
      combined_out.push_back(b.combined);
      const Verdict verdict = detect(b.combined, lambda);
      uint32_t pred;
      if (verdict == Verdict::seen) {
        pred = mlp.seen_class_ids[predict_seen(mlp, x)];
        (true_seen ? r.gzsl.routing.seen_as_seen : r.gzsl.routing.unseen_as_seen) += 1;
      } else {
        pred = expert.predict(x, unseen_ids);
        (true_seen ? r.gzsl.routing.seen_as_unseen : r.gzsl.routing.unseen_as_unseen) += 1;
      }
      preds.push_back(pred);
      labels.push_back(ds.labels[idx]);
      class_n[ds.labels[idx]] += 1;
      if (pred == ds.labels[idx]) class_correct[ds.labels[idx]] += 1;
    }
  };
  std::vector<uint32_t> preds_seen, labels_seen, preds_unseen, labels_unseen;
  route_block(views.test_seen, true, seen_combined, preds_seen, labels_seen);
  route_block(views.test_unseen, false, unseen_combined, preds_unseen, labels_unseen);

  r.gzsl.acc_seen = per_class_accuracy(preds_seen, labels_seen, seen_ids).mean;
  r.gzsl.acc_unseen = per_class_accuracy(preds_unseen, labels_unseen, unseen_ids).mean;
  r.gzsl.harmonic = harmonic_mean(r.gzsl.acc_seen, r.gzsl.acc_unseen);
  for (uint32_t c = 0; c < ds.num_classes(); ++c) {
    PerClassReportRow row;
    row.class_id = c;
    row.class_name = ds.class_names[c];
    row.seen = ds.is_seen_class(c);
    row.n = class_n[c];
    row.correct = class_correct[c];
    row.accuracy = class_n[c] > 0
                       ? static_cast<double>(class_correct[c]) / static_cast<double>(class_n[c])
                       : std::numeric_limits<double>::quiet_NaN();
    r.gzsl.per_class.push_back(std::move(row));
  }

  // ZSL accuracy of the unseen expert, independent of routing.
  {
    std::vector<uint32_t> preds, labels;
    preds.reserve(views.test_unseen.size());
    for (uint32_t idx : views.test_unseen) {
      preds.push_back(expert.predict(ds.features.row(idx), unseen_ids));
      labels.push_back(ds.labels[idx]);
    }
    r.gzsl.acc_zsl = per_class_accuracy(preds, labels, unseen_ids).mean;
  }

  r.ood.auroc = auroc(seen_combined, unseen_combined);
  r.ood.fpr95 = fpr_at_tpr(seen_combined, unseen_combined, 0.95);
  r.ood.aupr = aupr(seen_combined, unseen_combined);
  r.ood.roc = roc_points(seen_combined, unseen_combined);
  return r;
}

GzslReport evaluate_zsl(const Dataset& ds, const UnseenExpert& expert) {
  ds.validate();
  const SplitViews views = split_views(ds);
  if (views.test_unseen.empty())
    throw DataError("evaluate_zsl: requires unseen-class test samples");
  const std::vector<uint32_t> unseen_ids = ds.unseen_class_ids();

  GzslReport report;
  std::vector<uint32_t> preds, labels;
  std::vector<size_t> class_n(ds.num_classes(), 0), class_correct(ds.num_classes(), 0);
  for (uint32_t idx : views.test_unseen) {
    const uint32_t pred = expert.predict(ds.features.row(idx), unseen_ids);
    preds.push_back(pred);
    labels.push_back(ds.labels[idx]);
    class_n[ds.labels[idx]] += 1;
    if (pred == ds.labels[idx]) class_correct[ds.labels[idx]] += 1;
  }
  report.acc_zsl = per_class_accuracy(preds, labels, unseen_ids).mean;
  for (uint32_t c : unseen_ids) {
    PerClassReportRow row;
    row.class_id = c;
    row.class_name = ds.class_names[c];
    row.seen = false;
    row.n = class_n[c];
    row.correct = class_correct[c];
    row.accuracy = class_n[c] > 0
                       ? static_cast<double>(class_correct[c]) / static_cast<double>(class_n[c])
                       : std::numeric_limits<double>::quiet_NaN();
    report.per_class.push_back(std::move(row));
  }
  return report;
}

RunArtifacts run_gzsl(const PipelineConfig& cfg) {
  if (!expert_registered(cfg.unseen_expert))
    throw ValidationError("unseen expert '" + cfg.unseen_expert + "' is not registered");

  ScoredStack stack = prepare_stack(cfg);
  const Dataset& ds = stack.data.dataset;

  const double gamma = resolve_gamma(stack, cfg.detector);
  RunArtifacts a;
  a.generated = stack.generated;
  a.seen_epoch_loss = stack.seen_epoch_loss;
  a.detector = make_detector(stack.spectrum, stack.train_features, stack.mlp,
                             stack.principal_dim, gamma, cfg.detector.percentile);

  if (cfg.unseen_expert == "aligner") {
    AlignerConfig ucfg = cfg.unseen_cfg;
    ucfg.seed = cfg.seed + 2;
    AlignerTrainResult trained = train_unseen(ds, stack.views.train_seen, stack.data.embeddings,
                                              ucfg);
    a.aligner = std::move(trained.params);
    a.unseen_epoch_loss = std::move(trained.epoch_loss);
  }
  const ExpertContext ctx{&ds, &stack.data.embeddings, a.aligner ? &*a.aligner : nullptr};
  const std::unique_ptr<UnseenExpert> expert = make_expert(cfg.unseen_expert, ctx);

  EvalResult eval = evaluate_gzsl(ds, stack.mlp, a.detector, *expert);
  a.gzsl = std::move(eval.gzsl);
  a.ood = std::move(eval.ood);

  nlohmann::ordered_json prov = config_echo(cfg);
  prov["detector"] = {{"gamma", gamma},
                      {"principal_dim", stack.principal_dim},
                      {"percentile", cfg.detector.percentile},
                      {"threshold", a.detector.config.threshold},
                      {"center", cfg.detector.center}};
  nlohmann::ordered_json hashes;
  hashes["seen_mlp"] = hash_hex(serialized_hash([&](std::ostream& o) { save_mlp(o, stack.mlp); }));
  hashes["detector"] =
      hash_hex(serialized_hash([&](std::ostream& o) { save_detector(o, a.detector); }));
  if (a.aligner)
    hashes["aligner"] =
        hash_hex(serialized_hash([&](std::ostream& o) { save_aligner(o, *a.aligner); }));
  prov["artifact_hashes"] = hashes;
  a.provenance_json = prov.dump(2) + "\n";

  a.mlp = std::move(stack.mlp);
  a.data = std::move(stack.data);
  return a;
}

ZslArtifacts run_zsl(const PipelineConfig& cfg) {
  if (!expert_registered(cfg.unseen_expert))
    throw ValidationError("unseen expert '" + cfg.unseen_expert + "' is not registered");

  ZslArtifacts a;
  a.data = obtain_data(cfg, &a.generated);
  const Dataset& ds = a.data.dataset;
  const SplitViews views = split_views(ds);
  if (views.test_unseen.empty())
    throw DataError("zsl evaluation requires unseen-class test samples");

  if (cfg.unseen_expert == "aligner") {
    if (views.train_seen.empty())
      throw DataError("zsl: training the aligner requires train samples");
    AlignerConfig ucfg = cfg.unseen_cfg;
    ucfg.seed = cfg.seed + 2;
    AlignerTrainResult trained = train_unseen(ds, views.train_seen, a.data.embeddings, ucfg);
    a.aligner = std::move(trained.params);
    a.unseen_epoch_loss = std::move(trained.epoch_loss);
  }
  const ExpertContext ctx{&ds, &a.data.embeddings, a.aligner ? &*a.aligner : nullptr};
  const std::unique_ptr<UnseenExpert> expert = make_expert(cfg.unseen_expert, ctx);
  a.report = evaluate_zsl(ds, *expert);

  nlohmann::ordered_json prov = config_echo(cfg);
  if (a.aligner) {
    nlohmann::ordered_json hashes;
    hashes["aligner"] =
        hash_hex(serialized_hash([&](std::ostream& o) { save_aligner(o, *a.aligner); }));
    prov["artifact_hashes"] = hashes;
  }
  a.provenance_json = prov.dump(2) + "\n";
  return a;
}

void write_artifacts(const RunArtifacts& artifacts, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  if (artifacts.generated)
    save_features((base / "dataset.avf").string(), artifacts.data.dataset,
                  artifacts.data.embeddings);
  save_mlp((base / "seen_mlp.avmlp").string(), artifacts.mlp);
  if (artifacts.aligner) save_aligner((base / "aligner.avaln").string(), *artifacts.aligner);
  save_detector((base / "detector.avood").string(), artifacts.detector);
  write_text(base / "metrics.csv", metrics_csv(artifacts.gzsl, &artifacts.ood));
  write_text(base / "per_class.csv", per_class_csv(artifacts.gzsl));
  write_text(base / "report.jsonl", report_jsonl(artifacts.gzsl, &artifacts.ood));
  write_text(base / "roc.csv", roc_csv(artifacts.ood));
  write_text(base / "train_log.csv",
             train_log_csv(artifacts.seen_epoch_loss, artifacts.unseen_epoch_loss));
  write_text(base / "provenance.json", artifacts.provenance_json);
}

void write_artifacts(const ZslArtifacts& artifacts, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  if (artifacts.generated)
    save_features((base / "dataset.avf").string(), artifacts.data.dataset,
                  artifacts.data.embeddings);
  if (artifacts.aligner) save_aligner((base / "aligner.avaln").string(), *artifacts.aligner);
  write_text(base / "metrics.csv", metrics_csv(artifacts.report, nullptr));
  write_text(base / "per_class.csv", per_class_csv(artifacts.report));
  write_text(base / "report.jsonl", report_jsonl(artifacts.report, nullptr));
  write_text(base / "train_log.csv", train_log_csv({}, artifacts.unseen_epoch_loss));
  write_text(base / "provenance.json", artifacts.provenance_json);
}

}  // namespace avood
