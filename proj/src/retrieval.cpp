#include "dtcrs/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dtcrs/error.hpp"
#include "dtcrs/tree_builder.hpp"

namespace dtcrs {

const char* to_string(RetrievalMethod method) {
  switch (method) {
    case RetrievalMethod::kDpr: return "dpr";
    case RetrievalMethod::kCollapsed: return "collapsed";
    case RetrievalMethod::kTraversal: return "traversal";
  }
  return "unknown";
}

std::vector<std::string> RetrievalResult::texts() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.text);
  return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw ArgumentError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw ArgumentError("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

void rank(std::vector<RetrievedItem>& items) {
  std::sort(items.begin(), items.end(), [](const RetrievedItem& a, const RetrievedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node_id < b.node_id;
  });
}

RetrievedItem item_for(const SummaryNode& node, const EmbeddingVector& query) {
  return {node.id, cosine(query, node.embedding), node.layer, node.token_count, node.text};
}

}  // namespace

RetrievalResult dpr_topk(const EmbeddingVector& query, const std::vector<Chunk>& chunks,
                         const EmbeddingBatch& embeddings, std::size_t k, const std::string& query_id) {
  if (k == 0) throw ArgumentError("dpr_topk: k must be at least 1");
  if (embeddings.size() != chunks.size()) throw ArgumentError("dpr_topk: one embedding per chunk required");
  RetrievalResult out;
  out.query_id = query_id;
  out.method = RetrievalMethod::kDpr;
  std::vector<RetrievedItem> all;
  all.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    all.push_back({leaf_node_id(i), cosine(query, embeddings.vectors[i]), 0, chunks[i].token_count,
                   chunks[i].text});
  }
  rank(all);
  if (all.size() > k) all.resize(k);
  for (const auto& item : all) out.total_tokens += item.token_count;
  out.items = std::move(all);
  return out;
}

RetrievalResult collapsed_retrieve(const EmbeddingVector& query, const SummaryTree& tree,
                                   std::size_t budget_tokens, bool skip_overflow,
                                   const std::string& query_id) {
  RetrievalResult out;
  out.query_id = query_id;
  out.method = RetrievalMethod::kCollapsed;
  std::vector<RetrievedItem> all;
  all.reserve(tree.nodes().size());
  for (const auto& node : tree.nodes()) all.push_back(item_for(node, query));
  rank(all);
  for (auto& item : all) {
    if (out.total_tokens + item.token_count <= budget_tokens) {
      out.total_tokens += item.token_count;
      out.items.push_back(std::move(item));
    } else if (!skip_overflow) {
      break;
    }
  }
  return out;
}

RetrievalResult traverse_retrieve(const EmbeddingVector& query, const SummaryTree& tree,
                                  std::size_t k_per_layer, const std::string& query_id) {
  if (k_per_layer == 0) throw ArgumentError("traverse_retrieve: k must be at least 1");
  RetrievalResult out;
  out.query_id = query_id;
  out.method = RetrievalMethod::kTraversal;
  if (tree.empty()) return out;

  std::vector<RetrievedItem> candidates;
  for (const auto& id : tree.layers().at(tree.top_layer())) candidates.push_back(item_for(*tree.find(id), query));
  while (!candidates.empty()) {
    rank(candidates);
    if (candidates.size() > k_per_layer) candidates.resize(k_per_layer);
    std::set<std::string> next_ids;
    for (const auto& item : candidates) {
      for (const auto& child : tree.find(item.node_id)->children) next_ids.insert(child);
    }
    for (auto& item : candidates) {
      out.total_tokens += item.token_count;
      out.items.push_back(std::move(item));
    }
    candidates.clear();
    for (const auto& id : next_ids) candidates.push_back(item_for(*tree.find(id), query));
  }
  return out;
}

}  // namespace dtcrs
