#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "dtcrs/types.hpp"

namespace dtcrs {

enum class ReductionBackend { kManifold, kLinear };

const char* to_string(ReductionBackend backend);

/// Default sampling temperature per LLM step.
double default_temperature(LlmStep step);

/// Which concrete providers the pipeline talks to.
struct ProviderSettings {
  /// "mock" or "http".
  std::string llm = "http";
  /// "test" or "http".
  std::string embedding = "http";
  std::string base_url = "https://api.openai.com";
  std::string model_name = "gpt-4o-mini";
  std::string embedding_url = "http://127.0.0.1:8080/embed";
  double timeout_seconds = 120.0;
  int max_retries = 3;
  std::size_t context_tokens = 100000;
  std::size_t max_in_flight = 4;
  std::size_t test_embedding_dim = 16;
  std::uint64_t test_embedding_seed = 17;
  /// Directory with prompt template overrides; empty uses the built-in set.
  std::string prompt_dir;
};

struct PipelineConfig {
  std::size_t chunk_size_limit = 500;
  std::size_t summary_max_tokens = 100;
  std::size_t dpr_top_k = 5;
  std::size_t collapsed_budget_tokens = 3500;
  double gmm_threshold = 0.5;
  std::size_t umap_n_neighbors = 10;
  std::size_t umap_dim = 10;
  std::string umap_metric = "cosine";
  ReductionBackend reduction_backend = ReductionBackend::kManifold;
  int max_layers = 5;
  std::uint64_t rng_seed = 224;
  bool no_classify = false;
  bool no_toc = false;
  bool hierarchical_clustering = false;
  /// Largest cluster the hierarchical baseline emits.
  std::size_t hierarchical_cluster_cap = 10;
  /// Upper end of the BIC sweep for unseeded layers.
  std::size_t bic_max_clusters = 50;
  /// Collapsed retrieval keeps scanning past a node that does not fit.
  bool collapsed_skip_overflow = true;
  /// Worker threads for per-cluster summarization.
  std::size_t jobs = 1;
  std::map<LlmStep, double> temperatures = {
      {LlmStep::kToc, default_temperature(LlmStep::kToc)},
      {LlmStep::kClassify, default_temperature(LlmStep::kClassify)},
      {LlmStep::kDecompose, default_temperature(LlmStep::kDecompose)},
      {LlmStep::kSummarize, default_temperature(LlmStep::kSummarize)},
      {LlmStep::kAnswerFreeform, default_temperature(LlmStep::kAnswerFreeform)},
      {LlmStep::kAnswerChoice, default_temperature(LlmStep::kAnswerChoice)},
  };
  ProviderSettings providers;

  double temperature(LlmStep step) const;

  /// Throws ArgumentError on the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

}  // namespace dtcrs
