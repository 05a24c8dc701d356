#include "dtcrs/tree_builder.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <thread>

#include "dtcrs/clustering.hpp"
#include "dtcrs/reduction.hpp"

namespace dtcrs {

std::string leaf_node_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%06zu", index);
  return buf;
}

std::string summary_node_id(int layer, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "s%d-%04zu", layer, index);
  return buf;
}

std::size_t workload_static(std::size_t n_chunks) {
  if (n_chunks == 0) throw ArgumentError("workload needs at least one chunk");
  return 2 * n_chunks;
}

std::size_t workload_dynamic(std::size_t n_chunks, std::size_t n_subquestions) {
  if (n_chunks == 0 || n_subquestions == 0) throw ArgumentError("workload needs chunks and sub-questions");
  return n_chunks + 2 * n_subquestions;
}

namespace {

using Clock = std::chrono::steady_clock;
using Clusters = std::vector<std::vector<std::size_t>>;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Builder {
 public:
  Builder(const TreeBuildContext& ctx, std::string doc_id, std::optional<std::string> question_id)
      : ctx_(ctx), doc_id_(std::move(doc_id)), question_id_(std::move(question_id)) {}

  void add_leaves(const std::vector<Chunk>& chunks, const EmbeddingBatch& embeddings) {
    if (chunks.empty()) throw ArgumentError("tree needs at least one chunk");
    if (embeddings.size() != chunks.size()) {
      throw ArgumentError("expected one embedding per chunk");
    }
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      SummaryNode node;
      node.id = leaf_node_id(i);
      node.layer = 0;
      node.text = chunks[i].text;
      node.token_count = chunks[i].token_count;
      node.embedding = embeddings.vectors[i];
      current_.push_back(nodes_.size());
      nodes_.push_back(std::move(node));
    }
  }

  /// `layer_one` clusters the leaves; later layers always use BIC.
  template <typename LayerOne>
  SummaryTree run(LayerOne&& layer_one) {
    const auto started = Clock::now();
    for (int layer = 1; layer <= ctx_.config.max_layers; ++layer) {
      const std::size_t n = current_.size();
      if (layer == 1 ? n < 2 : n <= 2) break;

      LayerBuildRecord record;
      record.layer = layer;
      record.input_nodes = n;
      const auto t0 = Clock::now();
      Clusters clusters = layer == 1 ? layer_one(record) : cluster_unseeded(layer, record);
      drop_empty(clusters, layer);
      stats_.clustering_seconds += seconds_since(t0);
      if (clusters.empty() || clusters.size() >= n) break;

      record.cluster_count = clusters.size();
      summarize_layer(layer, clusters);
      stats_.layer_records.push_back(record);
    }
    stats_.total_seconds = seconds_since(started);
    SummaryTree tree(doc_id_, question_id_, nodes_, stats_);
    tree.validate();
    return tree;
  }

  Clusters cluster_unseeded(int layer, LayerBuildRecord& record) {
    const std::string tag = std::to_string(layer);
    const ReducedBatch reduced = reduce(current_matrix(), reduction_params("reduce:" + tag));
    record.skipped_reduction = reduced.skipped;
    const Eigen::MatrixXd& points = reduced.vectors;
    const auto n = static_cast<std::size_t>(points.rows());
    const std::size_t cap =
        bic_component_cap(n, static_cast<std::size_t>(points.cols()), ctx_.config.bic_max_clusters);
    const BicSelection sel = select_clusters_bic(points, cap, derive_seed(ctx_.seed, "bic:" + tag));
    Clusters clusters = soft_assign(sel.fit.responsibilities, ctx_.config.gmm_threshold).clusters;
    return maybe_refine(points, std::move(clusters), layer);
  }

  Clusters cluster_seeded(const SubQuestionSet& subqs, LayerBuildRecord& record) {
    EmbeddingBatch leaves;
    for (auto idx : current_) leaves.vectors.push_back(nodes_[idx].embedding);
    EmbeddingBatch questions;
    questions.vectors = subqs.embeddings;
    const ReducedBatch reduced = reduce_joint(leaves, questions, reduction_params("reduce:1"));
    record.seeded = true;
    record.skipped_reduction = reduced.skipped;
    const auto split = static_cast<Eigen::Index>(reduced.split_index);
    const Eigen::MatrixXd points = reduced.vectors.topRows(split);
    const Eigen::MatrixXd seeds = reduced.vectors.bottomRows(reduced.vectors.rows() - split);
    const EmFitResult fit = em_fit(points, seeded_init(points, seeds));
    Clusters clusters = soft_assign(fit.responsibilities, ctx_.config.gmm_threshold).clusters;
    return maybe_refine(points, std::move(clusters), 1);
  }

  const std::vector<std::size_t>& current() const { return current_; }
  BuildStats& stats() { return stats_; }

 private:
  ReductionParams reduction_params(const std::string& label) const {
    return ReductionParams::from_config(ctx_.config, derive_seed(ctx_.seed, label));
  }

  Eigen::MatrixXd current_matrix() const {
    std::vector<EmbeddingVector> vecs;
    vecs.reserve(current_.size());
    for (auto idx : current_) vecs.push_back(nodes_[idx].embedding);
    return to_matrix(vecs);
  }

  Clusters maybe_refine(const Eigen::MatrixXd& points, Clusters clusters, int layer) const {
    if (!ctx_.config.hierarchical_clustering) return clusters;
    HierarchicalOptions opt;
    opt.cluster_cap = ctx_.config.hierarchical_cluster_cap;
    opt.max_components = ctx_.config.bic_max_clusters;
    opt.threshold = ctx_.config.gmm_threshold;
    opt.local_dim_cap = ctx_.config.umap_dim;
    opt.seed = derive_seed(ctx_.seed, "refine:" + std::to_string(layer));
    return refine_clusters(points, clusters, opt);
  }

  void drop_empty(Clusters& clusters, int layer) {
    Clusters kept;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].empty()) {
        stats_.warnings.push_back("layer " + std::to_string(layer) + ": cluster " + std::to_string(c) +
                                  " has no members and was dropped");
      } else {
        kept.push_back(std::move(clusters[c]));
      }
    }
    clusters = std::move(kept);
  }

  void summarize_layer(int layer, const Clusters& clusters) {
    const auto t0 = Clock::now();
    std::vector<std::vector<std::string>> inputs(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      for (auto member : clusters[c]) inputs[c].push_back(nodes_[current_[member]].text);
    }

    std::vector<SummaryResult> summaries(clusters.size());
    std::vector<std::exception_ptr> failures(clusters.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t c = next++; c < clusters.size(); c = next++) {
        try {
          summaries[c] = ctx_.gateway.summarize_cluster(inputs[c], ctx_.config.summary_max_tokens);
        } catch (...) {
          failures[c] = std::current_exception();
        }
      }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(ctx_.config.jobs, clusters.size()));
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (failures[c]) fail(layer, failures[c]);
    }
    stats_.llm_summary_calls += clusters.size();

    const Tokenizer& tok = ctx_.gateway.tokenizer();
    std::vector<std::string> texts;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (summaries[c].text.empty()) {
        std::string joined;
        for (const auto& t : inputs[c]) joined += (joined.empty() ? "" : "\n\n") + t;
        auto [cut, truncated] = tok.truncate(joined, ctx_.config.summary_max_tokens);
        summaries[c].text = cut;
        summaries[c].token_count = tok.count(cut);
        stats_.warnings.push_back("layer " + std::to_string(layer) + ": empty summary for cluster " +
                                  std::to_string(c) + "; using member text");
      }
      texts.push_back(summaries[c].text);
    }

    EmbeddingBatch embedded;
    try {
      embedded = ctx_.embedder.embed(texts);
    } catch (const TransportError&) {
      fail(layer, std::current_exception());
    }

    std::vector<std::size_t> next_layer;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      SummaryNode node;
      node.id = summary_node_id(layer, c);
      node.layer = layer;
      node.text = summaries[c].text;
      node.token_count = summaries[c].token_count;
      node.embedding = embedded.vectors[c];
      for (auto member : clusters[c]) node.children.push_back(nodes_[current_[member]].id);
      next_layer.push_back(nodes_.size());
      nodes_.push_back(std::move(node));
    }
    current_ = std::move(next_layer);
    stats_.summarization_seconds += seconds_since(t0);
  }

  [[noreturn]] void fail(int layer, std::exception_ptr error) {
    std::string what;
    try {
      std::rethrow_exception(error);
    } catch (const TransportError& e) {
      what = e.what();
    } catch (...) {
      throw;
    }
    throw PartialTreeError("layer " + std::to_string(layer) + " failed: " + what,
                           SummaryTree(doc_id_, question_id_, nodes_, stats_), layer);
  }

  const TreeBuildContext& ctx_;
  std::string doc_id_;
  std::optional<std::string> question_id_;
  std::vector<SummaryNode> nodes_;
  std::vector<std::size_t> current_;
  BuildStats stats_;
};

std::string doc_of(const std::vector<Chunk>& chunks) { return chunks.empty() ? "" : chunks.front().doc_id; }

}  // namespace

SummaryTree build_dynamic_tree(const std::vector<Chunk>& chunks, const EmbeddingBatch& chunk_embeddings,
                               const SubQuestionSet& subqs, const TreeBuildContext& context) {
  if (subqs.count() == 0) throw ArgumentError("dynamic tree needs at least one sub-question");
  if (subqs.embeddings.size() != subqs.count()) {
    throw ArgumentError("sub-questions must be embedded before building");
  }
  Builder builder(context, doc_of(chunks), subqs.question_id);
  builder.add_leaves(chunks, chunk_embeddings);
  builder.stats().clustering_mode = context.config.hierarchical_clustering ? "hierarchical" : "seeded-global";
  return builder.run([&](LayerBuildRecord& record) {
    if (subqs.count() < builder.current().size()) return builder.cluster_seeded(subqs, record);
    builder.stats().warnings.push_back("layer 1: " + std::to_string(subqs.count()) +
                                       " sub-questions for " + std::to_string(builder.current().size()) +
                                       " chunks; using BIC selection instead of seeding");
    return builder.cluster_unseeded(1, record);
  });
}

SummaryTree build_static_tree(const std::vector<Chunk>& chunks, const EmbeddingBatch& chunk_embeddings,
                              const TreeBuildContext& context) {
  if (chunks.size() < 2) throw ArgumentError("static tree needs at least two chunks");
  Builder builder(context, doc_of(chunks), std::nullopt);
  builder.add_leaves(chunks, chunk_embeddings);
  builder.stats().clustering_mode = context.config.hierarchical_clustering ? "hierarchical" : "global";
  return builder.run([&](LayerBuildRecord& record) { return builder.cluster_unseeded(1, record); });
}

}  // namespace dtcrs
