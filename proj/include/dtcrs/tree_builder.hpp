#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dtcrs/config.hpp"
#include "dtcrs/embedding.hpp"
#include "dtcrs/error.hpp"
#include "dtcrs/llm.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

/// Providers and settings shared by every build.
struct TreeBuildContext {
  LlmGateway& gateway;
  const EmbeddingProvider& embedder;
  const PipelineConfig& config;
  /// Root seed of this build; per-layer seeds are derived from it.
  std::uint64_t seed = 0;
};

/// A summarization or embedding call failed mid-build. `partial` holds the
/// layers finished before the failure.
class PartialTreeError : public TransportError {
 public:
  PartialTreeError(const std::string& what, SummaryTree partial, int failed_layer)
      : TransportError(what), partial_(std::move(partial)), failed_layer_(failed_layer) {}

  const SummaryTree& partial() const { return partial_; }
  int failed_layer() const { return failed_layer_; }

 private:
  SummaryTree partial_;
  int failed_layer_;
};

/// Leaf id for the chunk at `index`.
std::string leaf_node_id(std::size_t index);
/// Summary id for position `index` within `layer`.
std::string summary_node_id(int layer, std::size_t index);

/// Question-specific tree. Layer 1 is a mixture seeded at the reduced
/// sub-question embeddings (one component per sub-question) when there are
/// fewer sub-questions than chunks, otherwise BIC-selected. Later layers are
/// BIC-selected from k-means++ starts. With `hierarchical_clustering` set,
/// every layer's clusters are additionally split down to the cluster cap.
///
/// `chunk_embeddings` must hold one vector per chunk, in order.
SummaryTree build_dynamic_tree(const std::vector<Chunk>& chunks, const EmbeddingBatch& chunk_embeddings,
                               const SubQuestionSet& subqs, const TreeBuildContext& context);

/// Question-independent tree: every layer is clustered by the hierarchical
/// baseline, or by plain BIC selection when `hierarchical_clustering` is off.
SummaryTree build_static_tree(const std::vector<Chunk>& chunks, const EmbeddingBatch& chunk_embeddings,
                              const TreeBuildContext& context);

/// Closed form of N + N/2 + N/4 + ...: 2N.
std::size_t workload_static(std::size_t n_chunks);
/// Closed form of N + Q + Q/2 + ...: N + 2Q.
std::size_t workload_dynamic(std::size_t n_chunks, std::size_t n_subquestions);

}  // namespace dtcrs
