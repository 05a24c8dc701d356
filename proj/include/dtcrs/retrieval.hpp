#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dtcrs/embedding.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

enum class RetrievalMethod { kDpr, kCollapsed, kTraversal };

const char* to_string(RetrievalMethod method);

struct RetrievedItem {
  std::string node_id;
  double score = 0.0;
  int layer = 0;
  std::size_t token_count = 0;
  std::string text;

  bool operator==(const RetrievedItem&) const = default;
};

struct RetrievalResult {
  std::string query_id;
  RetrievalMethod method = RetrievalMethod::kDpr;
  /// Score descending, ties by ascending node id (traversal: selection order).
  std::vector<RetrievedItem> items;
  std::size_t total_tokens = 0;

  std::vector<std::string> texts() const;
};

/// Throws ArgumentError on mismatched dimensions or a zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Exact top-k chunks by cosine similarity (full scan). Chunk i is reported
/// under leaf_node_id(i).
RetrievalResult dpr_topk(const EmbeddingVector& query, const std::vector<Chunk>& chunks,
                         const EmbeddingBatch& embeddings, std::size_t k,
                         const std::string& query_id = "");

/// All nodes of every layer ranked together and admitted in rank order while
/// they fit the token budget. With `skip_overflow` a node that does not fit
/// is passed over and the scan continues; otherwise the scan stops there.
RetrievalResult collapsed_retrieve(const EmbeddingVector& query, const SummaryTree& tree,
                                   std::size_t budget_tokens, bool skip_overflow = true,
                                   const std::string& query_id = "");

/// Top-k nodes of the top layer, then top-k among the children of that
/// selection, down to the leaves.
RetrievalResult traverse_retrieve(const EmbeddingVector& query, const SummaryTree& tree,
                                  std::size_t k_per_layer, const std::string& query_id = "");

}  // namespace dtcrs
