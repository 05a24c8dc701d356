#include "dtcrs/config.hpp"

#include <fstream>
#include <set>

#include "dtcrs/error.hpp"

namespace dtcrs {

using nlohmann::json;

const char* to_string(ReductionBackend backend) {
  return backend == ReductionBackend::kManifold ? "manifold" : "linear";
}

double default_temperature(LlmStep step) {
  return step == LlmStep::kSummarize ? 0.3 : 0.0;
}

double PipelineConfig::temperature(LlmStep step) const {
  const auto it = temperatures.find(step);
  return it == temperatures.end() ? default_temperature(step) : it->second;
}

void PipelineConfig::validate() const {
  if (chunk_size_limit == 0) throw ArgumentError("chunk_size_limit must be > 0");
  if (summary_max_tokens == 0) throw ArgumentError("summary_max_tokens must be > 0");
  if (dpr_top_k == 0) throw ArgumentError("dpr_top_k must be >= 1");
  if (collapsed_budget_tokens == 0) throw ArgumentError("collapsed_budget_tokens must be > 0");
  if (!(gmm_threshold > 0.0 && gmm_threshold <= 1.0)) {
    throw ArgumentError("gmm_threshold must lie in (0, 1]");
  }
  if (umap_n_neighbors < 2) throw ArgumentError("umap_n_neighbors must be >= 2");
  if (umap_dim < 1) throw ArgumentError("umap_dim must be >= 1");
  if (umap_metric != "cosine") throw ArgumentError("umap_metric must be 'cosine'");
  if (max_layers < 1) throw ArgumentError("max_layers must be >= 1");
  if (hierarchical_cluster_cap < 2) throw ArgumentError("hierarchical_cluster_cap must be >= 2");
  if (bic_max_clusters < 1) throw ArgumentError("bic_max_clusters must be >= 1");
  if (jobs < 1) throw ArgumentError("jobs must be >= 1");
  for (const auto& [step, t] : temperatures) {
    if (!(t >= 0.0 && t <= 2.0)) {
      throw ArgumentError(std::string("temperature for ") + to_string(step) + " out of range");
    }
  }
  if (providers.llm != "mock" && providers.llm != "http") {
    throw ArgumentError("providers.llm must be 'mock' or 'http'");
  }
  if (providers.embedding != "test" && providers.embedding != "http") {
    throw ArgumentError("providers.embedding must be 'test' or 'http'");
  }
  if (!(providers.timeout_seconds > 0.0)) throw ArgumentError("providers.timeout_seconds must be > 0");
  if (providers.max_retries < 0) throw ArgumentError("providers.max_retries must be >= 0");
  if (providers.test_embedding_dim == 0) throw ArgumentError("providers.test_embedding_dim must be > 0");
  if (providers.max_in_flight == 0) throw ArgumentError("providers.max_in_flight must be > 0");
}

json to_json(const PipelineConfig& c) {
  json temps = json::object();
  for (const auto& [step, t] : c.temperatures) temps[to_string(step)] = t;
  const auto& p = c.providers;
  return json{
      {"chunk_size_limit", c.chunk_size_limit},
      {"summary_max_tokens", c.summary_max_tokens},
      {"dpr_top_k", c.dpr_top_k},
      {"collapsed_budget_tokens", c.collapsed_budget_tokens},
      {"gmm_threshold", c.gmm_threshold},
      {"umap_n_neighbors", c.umap_n_neighbors},
      {"umap_dim", c.umap_dim},
      {"umap_metric", c.umap_metric},
      {"reduction_backend", to_string(c.reduction_backend)},
      {"max_layers", c.max_layers},
      {"rng_seed", c.rng_seed},
      {"no_classify", c.no_classify},
      {"no_toc", c.no_toc},
      {"hierarchical_clustering", c.hierarchical_clustering},
      {"hierarchical_cluster_cap", c.hierarchical_cluster_cap},
      {"bic_max_clusters", c.bic_max_clusters},
      {"collapsed_skip_overflow", c.collapsed_skip_overflow},
      {"jobs", c.jobs},
      {"temperatures", temps},
      {"providers",
       {{"llm", p.llm},
        {"embedding", p.embedding},
        {"base_url", p.base_url},
        {"model_name", p.model_name},
        {"embedding_url", p.embedding_url},
        {"timeout_seconds", p.timeout_seconds},
        {"max_retries", p.max_retries},
        {"context_tokens", p.context_tokens},
        {"max_in_flight", p.max_in_flight},
        {"test_embedding_dim", p.test_embedding_dim},
        {"test_embedding_seed", p.test_embedding_seed},
        {"prompt_dir", p.prompt_dir}}},
  };
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ArgumentError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ArgumentError("unknown config field '" + where + key + "'");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  reject_unknown(j,
                 {"chunk_size_limit", "summary_max_tokens", "dpr_top_k", "collapsed_budget_tokens",
                  "gmm_threshold", "umap_n_neighbors", "umap_dim", "umap_metric",
                  "reduction_backend", "max_layers", "rng_seed", "no_classify", "no_toc",
                  "hierarchical_clustering", "hierarchical_cluster_cap", "bic_max_clusters",
                  "collapsed_skip_overflow", "jobs", "temperatures", "providers"},
                 "");
  PipelineConfig c;
  read_field(j, "chunk_size_limit", c.chunk_size_limit);
  read_field(j, "summary_max_tokens", c.summary_max_tokens);
  read_field(j, "dpr_top_k", c.dpr_top_k);
  read_field(j, "collapsed_budget_tokens", c.collapsed_budget_tokens);
  read_field(j, "gmm_threshold", c.gmm_threshold);
  read_field(j, "umap_n_neighbors", c.umap_n_neighbors);
  read_field(j, "umap_dim", c.umap_dim);
  read_field(j, "umap_metric", c.umap_metric);
  std::string backend = to_string(c.reduction_backend);
  read_field(j, "reduction_backend", backend);
  if (backend == "manifold") {
    c.reduction_backend = ReductionBackend::kManifold;
  } else if (backend == "linear") {
    c.reduction_backend = ReductionBackend::kLinear;
  } else {
    throw ArgumentError("reduction_backend must be 'manifold' or 'linear'");
  }
  read_field(j, "max_layers", c.max_layers);
  read_field(j, "rng_seed", c.rng_seed);
  read_field(j, "no_classify", c.no_classify);
  read_field(j, "no_toc", c.no_toc);
  read_field(j, "hierarchical_clustering", c.hierarchical_clustering);
  read_field(j, "hierarchical_cluster_cap", c.hierarchical_cluster_cap);
  read_field(j, "bic_max_clusters", c.bic_max_clusters);
  read_field(j, "collapsed_skip_overflow", c.collapsed_skip_overflow);
  read_field(j, "jobs", c.jobs);
  if (const auto it = j.find("temperatures"); it != j.end()) {
    if (!it->is_object()) throw ArgumentError("temperatures must be an object");
    for (const auto& [name, value] : it->items()) {
      if (!value.is_number()) throw ArgumentError("temperature '" + name + "' must be a number");
      c.temperatures[llm_step_from_string(name)] = value.get<double>();
    }
  }
  if (const auto it = j.find("providers"); it != j.end()) {
    if (!it->is_object()) throw ArgumentError("providers must be an object");
    const json& pj = *it;
    reject_unknown(pj,
                   {"llm", "embedding", "base_url", "model_name", "embedding_url",
                    "timeout_seconds", "max_retries", "context_tokens", "max_in_flight",
                    "test_embedding_dim", "test_embedding_seed", "prompt_dir"},
                   "providers.");
    auto& p = c.providers;
    read_field(pj, "llm", p.llm);
    read_field(pj, "embedding", p.embedding);
    read_field(pj, "base_url", p.base_url);
    read_field(pj, "model_name", p.model_name);
    read_field(pj, "embedding_url", p.embedding_url);
    read_field(pj, "timeout_seconds", p.timeout_seconds);
    read_field(pj, "max_retries", p.max_retries);
    read_field(pj, "context_tokens", p.context_tokens);
    read_field(pj, "max_in_flight", p.max_in_flight);
    read_field(pj, "test_embedding_dim", p.test_embedding_dim);
    read_field(pj, "test_embedding_seed", p.test_embedding_seed);
    read_field(pj, "prompt_dir", p.prompt_dir);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArgumentError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace dtcrs
