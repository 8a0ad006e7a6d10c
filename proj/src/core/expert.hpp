#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aligner.hpp"
#include "dataset.hpp"

namespace avood {

// The unseen-expert seam: any classifier that can pick a class from a
// candidate set given a feature vector. Predictions must come from the
// candidate set.
class UnseenExpert {
 public:
  virtual ~UnseenExpert() = default;
  virtual uint32_t predict(std::span<const double> feature,
                           std::span<const uint32_t> candidate_classes) const = 0;
};

// Everything a factory may need to build an expert for a run.
struct ExpertContext {
  const Dataset* dataset = nullptr;
  const ClassEmbeddingTable* embeddings = nullptr;
  const AlignerParams* aligner = nullptr;  // null unless an aligner was trained/loaded
};

using ExpertFactory = std::function<std::unique_ptr<UnseenExpert>(const ExpertContext&)>;

// Name-keyed registry. "aligner" (nearest text projection) and "oracle"
// (answers with the true label; test seam) are built in. Registering an
// existing name replaces it.
void register_expert(const std::string& name, ExpertFactory factory);
bool expert_registered(const std::string& name);
std::vector<std::string> registered_experts();
std::unique_ptr<UnseenExpert> make_expert(const std::string& name, const ExpertContext& ctx);

}  // namespace avood
