#include "avood/avood.h"

#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include "aligner.hpp"
#include "binary_io.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "expert.hpp"
#include "feature_io.hpp"
#include "mlp.hpp"
#include "ood.hpp"
#include "pipeline.hpp"
#include "report.hpp"

using namespace avood;

// Handle definitions. Each wraps the core value plus whatever run metadata
// (training curves) callers may want to read back.
struct avood_dataset {
  GeneratedData data;
};
struct avood_mlp {
  MlpParams params;
  std::vector<double> epoch_loss;
};
struct avood_detector {
  Detector det;
};
struct avood_aligner {
  AlignerParams params;
  std::vector<double> epoch_loss;
};
struct avood_report {
  GzslReport gzsl;
  std::optional<OodReport> ood;
};

namespace {

thread_local std::string g_last_error;

avood_status fail(avood_status code, const char* what) {
  g_last_error = what;
  return code;
}

avood_status fail(const Error& e) {
  g_last_error = e.what();
  switch (e.kind()) {
    case ErrorKind::config:
      return AVOOD_ERROR_CONFIG;
    case ErrorKind::data:
      return AVOOD_ERROR_DATA;
    case ErrorKind::numeric:
      return AVOOD_ERROR_NUMERIC;
  }
  return AVOOD_ERROR_CONFIG;
}

template <typename Fn>
avood_status guarded(Fn&& fn) {
  try {
    fn();
    return AVOOD_OK;
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AVOOD_ERROR_NUMERIC;
  }
}

avood_status require(bool ok, const char* what) {
  return ok ? AVOOD_OK : fail(AVOOD_ERROR_CONFIG, what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

SynthConfig to_core(const avood_synth_config& c) {
  SynthConfig s;
  s.n_seen_classes = c.seen_classes;
  s.n_unseen_classes = c.unseen_classes;
  s.dim_feature = c.feature_dim;
  s.dim_text = c.text_dim;
  s.samples_per_class_train = c.train_per_class;
  s.samples_per_class_test = c.test_per_class;
  s.class_separation = c.class_separation;
  s.noise_scale = c.noise_scale;
  s.seed = c.seed;
  return s;
}

TrainConfig to_core(const avood_train_config& c) {
  TrainConfig t;
  t.hidden1 = c.hidden1;
  t.hidden2 = c.hidden2;
  t.learning_rate = c.learning_rate;
  t.beta1 = c.beta1;
  t.beta2 = c.beta2;
  t.epsilon = c.epsilon;
  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.seed = c.seed;
  return t;
}

AlignerConfig to_core(const avood_aligner_config& c) {
  AlignerConfig a;
  a.embed_dim = c.embed_dim;
  a.proj_dim = c.proj_dim;
  a.learning_rate = c.learning_rate;
  a.beta1 = c.beta1;
  a.beta2 = c.beta2;
  a.epsilon = c.epsilon;
  a.batch_size = c.batch_size;
  a.epochs = c.epochs;
  a.seed = c.seed;
  a.normalize_projections = c.normalize_projections != 0;
  return a;
}

// Wraps a C callback as an UnseenExpert.
class CallbackExpert : public UnseenExpert {
 public:
  CallbackExpert(avood_expert_fn fn, void* user) : fn_(fn), user_(user) {}
  uint32_t predict(std::span<const double> feature,
                   std::span<const uint32_t> candidates) const override {
    uint32_t out = 0;
    if (fn_(user_, feature.data(), feature.size(), candidates.data(), candidates.size(), &out) !=
        0)
      throw ValidationError("registered expert callback reported failure");
    for (uint32_t c : candidates)
      if (c == out) return out;
    throw ValidationError("registered expert returned a class outside the candidate set");
  }

 private:
  avood_expert_fn fn_;
  void* user_;
};

}  // namespace

extern "C" {

const char* avood_last_error(void) { return g_last_error.c_str(); }

const char* avood_version(void) { return "1.0.0"; }

void avood_synth_config_default(avood_synth_config* cfg) {
  const SynthConfig s;
  *cfg = {s.n_seen_classes, s.n_unseen_classes, s.dim_feature,        s.dim_text,
          s.samples_per_class_train, s.samples_per_class_test, s.class_separation, s.noise_scale,
          s.seed};
}

void avood_synth_config_small(avood_synth_config* cfg) {
  const SynthConfig s = SynthConfig::small_profile();
  *cfg = {s.n_seen_classes, s.n_unseen_classes, s.dim_feature,        s.dim_text,
          s.samples_per_class_train, s.samples_per_class_test, s.class_separation, s.noise_scale,
          s.seed};
}

void avood_train_config_default(avood_train_config* cfg) {
  const TrainConfig t;
  *cfg = {t.hidden1,    t.hidden2, t.learning_rate, t.beta1, t.beta2,
          t.epsilon, t.batch_size, t.epochs,        t.seed};
}

void avood_aligner_config_default(avood_aligner_config* cfg) {
  const AlignerConfig a;
  *cfg = {a.embed_dim,  a.proj_dim, a.learning_rate, a.beta1, a.beta2, a.epsilon,
          a.batch_size, a.epochs,   a.seed,          a.normalize_projections ? 1 : 0};
}

void avood_detector_config_default(avood_detector_config* cfg) {
  *cfg = {0, -1.0, 5.0, 0};
}

avood_status avood_dataset_generate(const avood_synth_config* cfg, avood_dataset** out) {
  if (auto s = require(cfg && out, "dataset_generate: null argument")) return s;
  return guarded([&] { *out = new avood_dataset{generate_synthetic(to_core(*cfg))}; });
}

avood_status avood_dataset_load(const char* path, avood_dataset** out) {
  if (auto s = require(path && out, "dataset_load: null argument")) return s;
  return guarded([&] { *out = new avood_dataset{load_features(path)}; });
}

avood_status avood_dataset_save(const avood_dataset* ds, const char* path) {
  if (auto s = require(ds && path, "dataset_save: null argument")) return s;
  return guarded([&] { save_features(path, ds->data.dataset, ds->data.embeddings); });
}

void avood_dataset_free(avood_dataset* ds) { delete ds; }

avood_status avood_dataset_get_info(const avood_dataset* ds, avood_dataset_info* out) {
  if (auto s = require(ds && out, "dataset_get_info: null argument")) return s;
  const Dataset& d = ds->data.dataset;
  out->num_samples = static_cast<uint32_t>(d.num_samples());
  out->feature_dim = static_cast<uint32_t>(d.dim());
  out->num_classes = static_cast<uint32_t>(d.num_classes());
  out->text_dim = static_cast<uint32_t>(ds->data.embeddings.dim());
  out->num_seen_classes = static_cast<uint32_t>(d.seen_class_ids().size());
  uint32_t n_train = 0;
  for (Split sp : d.split)
    if (sp == Split::train) ++n_train;
  out->num_train_samples = n_train;
  return AVOOD_OK;
}

avood_status avood_dataset_l2_normalize(avood_dataset* ds) {
  if (auto s = require(ds != nullptr, "dataset_l2_normalize: null argument")) return s;
  return guarded([&] { l2_normalize_features(ds->data.dataset); });
}

avood_status avood_mlp_train(const avood_dataset* ds, const avood_train_config* cfg,
                             avood_mlp** out) {
  if (auto s = require(ds && cfg && out, "mlp_train: null argument")) return s;
  return guarded([&] {
    const SplitViews views = split_views(ds->data.dataset);
    MlpTrainResult r = train_seen(ds->data.dataset, views.train_seen, to_core(*cfg));
    *out = new avood_mlp{std::move(r.params), std::move(r.epoch_loss)};
  });
}

avood_status avood_mlp_save(const avood_mlp* mlp, const char* path) {
  if (auto s = require(mlp && path, "mlp_save: null argument")) return s;
  return guarded([&] { save_mlp(path, mlp->params); });
}

avood_status avood_mlp_load(const char* path, avood_mlp** out) {
  if (auto s = require(path && out, "mlp_load: null argument")) return s;
  return guarded([&] { *out = new avood_mlp{load_mlp_file(path), {}}; });
}

void avood_mlp_free(avood_mlp* mlp) { delete mlp; }

avood_status avood_mlp_train_loss(const avood_mlp* mlp, const double** loss, size_t* count) {
  if (auto s = require(mlp && loss && count, "mlp_train_loss: null argument")) return s;
  *loss = mlp->epoch_loss.data();
  *count = mlp->epoch_loss.size();
  return AVOOD_OK;
}

avood_status avood_detector_fit(const avood_dataset* ds, const avood_mlp* mlp,
                                const avood_detector_config* cfg, avood_detector** out) {
  if (auto s = require(ds && mlp && cfg && out, "detector_fit: null argument")) return s;
  return guarded([&] {
    const Dataset& d = ds->data.dataset;
    const SplitViews views = split_views(d);
    if (views.train_seen.empty()) throw DataError("detector_fit: no training samples");
    Matrix train_x(views.train_seen.size(), d.dim());
    for (size_t i = 0; i < views.train_seen.size(); ++i)
      std::copy_n(d.features.row(views.train_seen[i]).data(), d.dim(), train_x.row(i).data());

    uint32_t n = cfg->principal_dim;
    if (n == 0) n = static_cast<uint32_t>(std::max<size_t>(1, std::min<size_t>(64, d.dim() / 4)));
    const SubspaceSpectrum spectrum = fit_spectrum(train_x, cfg->center != 0);

    double gamma = cfg->gamma;
    if (gamma < 0.0) {
      // Auto gamma: argmax AUROC over {0} ∪ default grid on the test split.
      if (views.test_seen.empty() || views.test_unseen.empty())
        throw DataError("detector_fit: automatic gamma needs test samples on both sides");
      const SubspaceModel model = slice_subspace(spectrum, n);
      auto scores = [&](const std::vector<uint32_t>& view, std::vector<double>& e,
                        std::vector<double>& r) {
        for (uint32_t idx : view) {
          e.push_back(energy_score(mlp_forward(mlp->params, d.features.row(idx))));
          r.push_back(residual_score(model, d.features.row(idx)));
        }
      };
      std::vector<double> es, rs, eu, ru;
      scores(views.test_seen, es, rs);
      scores(views.test_unseen, eu, ru);
      std::vector<double> grid{0.0};
      for (double g : default_gamma_grid()) grid.push_back(g);
      double best_auc = -1.0;
      for (double g : grid) {
        std::vector<double> cs(es.size()), cu(eu.size());
        for (size_t i = 0; i < es.size(); ++i) cs[i] = combined_score(es[i], rs[i], g);
        for (size_t i = 0; i < eu.size(); ++i) cu[i] = combined_score(eu[i], ru[i], g);
        const double a = auroc(cs, cu);
        if (a > best_auc) {
          best_auc = a;
          gamma = g;
        }
      }
    }
    *out = new avood_detector{
        make_detector(spectrum, train_x, mlp->params, n, gamma, cfg->percentile)};
  });
}

avood_status avood_detector_save(const avood_detector* det, const char* path) {
  if (auto s = require(det && path, "detector_save: null argument")) return s;
  return guarded([&] { save_detector(path, det->det); });
}

avood_status avood_detector_load(const char* path, const avood_mlp* mlp, int* hash_mismatch,
                                 avood_detector** out) {
  if (auto s = require(path && out, "detector_load: null argument")) return s;
  return guarded([&] {
    bool mismatch = false;
    Detector d = load_detector_file(path, mlp ? &mlp->params : nullptr, &mismatch);
    if (hash_mismatch != nullptr) *hash_mismatch = mismatch ? 1 : 0;
    *out = new avood_detector{std::move(d)};
  });
}

void avood_detector_free(avood_detector* det) { delete det; }

avood_status avood_detector_score(const avood_detector* det, const avood_mlp* mlp,
                                  const double* feature, size_t dim,
                                  avood_score_breakdown* out) {
  if (auto s = require(det && mlp && feature && out, "detector_score: null argument")) return s;
  return guarded([&] {
    const ScoreBreakdown b =
        score_breakdown(det->det, mlp->params, std::span<const double>(feature, dim));
    out->energy = b.energy;
    out->residual = b.residual;
    out->combined = b.combined;
    out->verdict_seen = detect(b.combined, det->det.config.threshold) == Verdict::seen ? 1 : 0;
  });
}

avood_status avood_aligner_train(const avood_dataset* ds, const avood_aligner_config* cfg,
                                 avood_aligner** out) {
  if (auto s = require(ds && cfg && out, "aligner_train: null argument")) return s;
  return guarded([&] {
    const SplitViews views = split_views(ds->data.dataset);
    AlignerTrainResult r =
        train_unseen(ds->data.dataset, views.train_seen, ds->data.embeddings, to_core(*cfg));
    *out = new avood_aligner{std::move(r.params), std::move(r.epoch_loss)};
  });
}

avood_status avood_aligner_save(const avood_aligner* al, const char* path) {
  if (auto s = require(al && path, "aligner_save: null argument")) return s;
  return guarded([&] { save_aligner(path, al->params); });
}

avood_status avood_aligner_load(const char* path, avood_aligner** out) {
  if (auto s = require(path && out, "aligner_load: null argument")) return s;
  return guarded([&] { *out = new avood_aligner{load_aligner_file(path), {}}; });
}

void avood_aligner_free(avood_aligner* al) { delete al; }

avood_status avood_aligner_train_loss(const avood_aligner* al, const double** loss,
                                      size_t* count) {
  if (auto s = require(al && loss && count, "aligner_train_loss: null argument")) return s;
  *loss = al->epoch_loss.data();
  *count = al->epoch_loss.size();
  return AVOOD_OK;
}

avood_status avood_expert_register(const char* name, avood_expert_fn fn, void* user_data) {
  if (auto s = require(name && fn, "expert_register: null argument")) return s;
  return guarded([&] {
    register_expert(name, [fn, user_data](const ExpertContext&) {
      return std::make_unique<CallbackExpert>(fn, user_data);
    });
  });
}

avood_status avood_evaluate_gzsl(const avood_dataset* ds, const avood_mlp* mlp,
                                 const avood_detector* det, const avood_aligner* aligner,
                                 const char* expert_name, avood_report** out) {
  if (auto s = require(ds && mlp && det && expert_name && out, "evaluate_gzsl: null argument"))
    return s;
  return guarded([&] {
    const ExpertContext ctx{&ds->data.dataset, &ds->data.embeddings,
                            aligner ? &aligner->params : nullptr};
    const std::unique_ptr<UnseenExpert> expert = make_expert(expert_name, ctx);
    EvalResult r = evaluate_gzsl(ds->data.dataset, mlp->params, det->det, *expert);
    *out = new avood_report{std::move(r.gzsl), std::move(r.ood)};
  });
}

avood_status avood_evaluate_zsl(const avood_dataset* ds, const avood_aligner* aligner,
                                const char* expert_name, avood_report** out) {
  if (auto s = require(ds && expert_name && out, "evaluate_zsl: null argument")) return s;
  return guarded([&] {
    const ExpertContext ctx{&ds->data.dataset, &ds->data.embeddings,
                            aligner ? &aligner->params : nullptr};
    const std::unique_ptr<UnseenExpert> expert = make_expert(expert_name, ctx);
    *out = new avood_report{evaluate_zsl(ds->data.dataset, *expert), std::nullopt};
  });
}

void avood_report_free(avood_report* report) { delete report; }

avood_status avood_report_value(const avood_report* report, const char* metric, double* out) {
  if (auto s = require(report && metric && out, "report_value: null argument")) return s;
  const std::string m = metric;
  if (m == "acc_S") {
    *out = report->gzsl.acc_seen;
  } else if (m == "acc_U") {
    *out = report->gzsl.acc_unseen;
  } else if (m == "H") {
    *out = report->gzsl.harmonic;
  } else if (m == "acc_ZSL" && report->gzsl.acc_zsl) {
    *out = *report->gzsl.acc_zsl;
  } else if (m == "auroc" && report->ood) {
    *out = report->ood->auroc;
  } else if (m == "fpr95" && report->ood) {
    *out = report->ood->fpr95;
  } else if (m == "aupr" && report->ood) {
    *out = report->ood->aupr;
  } else {
    return fail(AVOOD_ERROR_CONFIG, "report_value: unknown or unavailable metric");
  }
  return AVOOD_OK;
}

avood_status avood_report_metrics_csv(const avood_report* report, char** out) {
  if (auto s = require(report && out, "report_metrics_csv: null argument")) return s;
  return guarded(
      [&] { *out = dup_string(metrics_csv(report->gzsl, report->ood ? &*report->ood : nullptr)); });
}

avood_status avood_report_per_class_csv(const avood_report* report, char** out) {
  if (auto s = require(report && out, "report_per_class_csv: null argument")) return s;
  return guarded([&] { *out = dup_string(per_class_csv(report->gzsl)); });
}

avood_status avood_report_jsonl(const avood_report* report, char** out) {
  if (auto s = require(report && out, "report_jsonl: null argument")) return s;
  return guarded(
      [&] { *out = dup_string(report_jsonl(report->gzsl, report->ood ? &*report->ood : nullptr)); });
}

avood_status avood_report_roc_csv(const avood_report* report, char** out) {
  if (auto s = require(report && out, "report_roc_csv: null argument")) return s;
  if (!report->ood) return fail(AVOOD_ERROR_CONFIG, "report_roc_csv: report has no OOD section");
  return guarded([&] { *out = dup_string(roc_csv(*report->ood)); });
}

avood_status avood_report_summary(const avood_report* report, char** out) {
  if (auto s = require(report && out, "report_summary: null argument")) return s;
  return guarded(
      [&] { *out = dup_string(summary_text(report->gzsl, report->ood ? &*report->ood : nullptr)); });
}

avood_status avood_sweep_gamma_csv(const avood_dataset* ds, const avood_train_config* seen_cfg,
                                   const avood_detector_config* det_cfg, const double* grid,
                                   size_t grid_len, uint64_t seed, char** out) {
  if (auto s = require(ds && seen_cfg && det_cfg && out, "sweep_gamma: null argument")) return s;
  return guarded([&] {
    const DetectorSettings det{det_cfg->gamma, det_cfg->principal_dim, det_cfg->percentile,
                               det_cfg->center != 0};
    const ScoredStack stack = prepare_stack_on(ds->data, to_core(*seen_cfg), det, seed);
    const std::vector<double> g = grid != nullptr && grid_len > 0
                                      ? std::vector<double>(grid, grid + grid_len)
                                      : default_gamma_grid();
    *out = dup_string(gamma_table_csv(sweep_gamma(stack, g)));
  });
}

avood_status avood_sweep_dim_csv(const avood_dataset* ds, const avood_train_config* seen_cfg,
                                 const avood_detector_config* det_cfg, const uint32_t* grid,
                                 size_t grid_len, uint64_t seed, char** out) {
  if (auto s = require(ds && seen_cfg && det_cfg && grid && grid_len > 0 && out,
                       "sweep_dim: null or empty argument"))
    return s;
  return guarded([&] {
    const DetectorSettings det{det_cfg->gamma, det_cfg->principal_dim, det_cfg->percentile,
                               det_cfg->center != 0};
    const ScoredStack stack = prepare_stack_on(ds->data, to_core(*seen_cfg), det, seed);
    const double gamma = resolve_gamma(stack, det);
    *out = dup_string(
        dim_table_csv(sweep_dim(stack, gamma, std::vector<uint32_t>(grid, grid + grid_len))));
  });
}

void avood_string_free(char* s) { delete[] s; }

uint64_t avood_fnv1a(const void* data, size_t n) { return fnv1a(data, n); }

}  // extern "C"
