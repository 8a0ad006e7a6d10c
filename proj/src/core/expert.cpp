#include "expert.hpp"

#include <cstring>
#include <map>
#include <mutex>
#include <unordered_map>

#include "errors.hpp"

namespace avood {

namespace {

// Predicts by nearest text projection, mirroring the trained aligner.
class AlignerExpert : public UnseenExpert {
 public:
  AlignerExpert(AlignerParams params, const ClassEmbeddingTable& table)
      : params_(std::move(params)), table_(table.embeddings) {}

  uint32_t predict(std::span<const double> feature,
                   std::span<const uint32_t> candidates) const override {
    if (candidates.empty()) throw ValidationError("aligner expert: empty candidate set");
    Matrix rows(candidates.size(), table_.cols());
    for (size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] >= table_.rows())
        throw ValidationError("aligner expert: candidate class out of range");
      std::copy_n(table_.row(candidates[i]).data(), table_.cols(), rows.row(i).data());
    }
    return candidates[predict_nn(params_, feature, rows)];
  }

 private:
  AlignerParams params_;
  Matrix table_;
};

// Looks the sample up by its exact feature bytes and answers with the true
// label. Only meaningful for features that reach prediction unchanged; used
// to exercise the plug-in seam and upper-bound the routing.
class OracleExpert : public UnseenExpert {
 public:
  explicit OracleExpert(const Dataset& ds) {
    for (size_t i = 0; i < ds.num_samples(); ++i) {
      const auto row = ds.features.row(i);
      std::string key(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(double));
      labels_.emplace(std::move(key), ds.labels[i]);
    }
  }

  uint32_t predict(std::span<const double> feature,
                   std::span<const uint32_t> candidates) const override {
    if (candidates.empty()) throw ValidationError("oracle expert: empty candidate set");
    std::string key(reinterpret_cast<const char*>(feature.data()),
                    feature.size() * sizeof(double));
    const auto it = labels_.find(key);
    if (it != labels_.end()) {
      for (uint32_t c : candidates)
        if (c == it->second) return c;
    }
    return candidates.front();
  }

 private:
  std::unordered_map<std::string, uint32_t> labels_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, ExpertFactory> factories;

  Registry() {
    factories["aligner"] = [](const ExpertContext& ctx) -> std::unique_ptr<UnseenExpert> {
      if (ctx.aligner == nullptr)
        throw ValidationError("expert 'aligner': no trained aligner available");
      if (ctx.embeddings == nullptr)
        throw ValidationError("expert 'aligner': no class embeddings available");
      return std::make_unique<AlignerExpert>(*ctx.aligner, *ctx.embeddings);
    };
    factories["oracle"] = [](const ExpertContext& ctx) -> std::unique_ptr<UnseenExpert> {
      if (ctx.dataset == nullptr)
        throw ValidationError("expert 'oracle': no dataset available");
      return std::make_unique<OracleExpert>(*ctx.dataset);
    };
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_expert(const std::string& name, ExpertFactory factory) {
  if (name.empty()) throw ValidationError("register_expert: empty name");
  if (!factory) throw ValidationError("register_expert: empty factory");
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mutex);
  r.factories[name] = std::move(factory);
}

bool expert_registered(const std::string& name) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mutex);
  return r.factories.count(name) != 0;
}

std::vector<std::string> registered_experts() {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.factories) names.push_back(name);
  return names;
}

std::unique_ptr<UnseenExpert> make_expert(const std::string& name, const ExpertContext& ctx) {
  ExpertFactory factory;
  {
    Registry& r = registry();
    std::lock_guard<std::mutex> lock(r.mutex);
    const auto it = r.factories.find(name);
    if (it == r.factories.end())
      throw ValidationError("unseen expert '" + name + "' is not registered");
    factory = it->second;
  }
  return factory(ctx);
}

}  // namespace avood
