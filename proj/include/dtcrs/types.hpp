#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dtcrs {

struct Document {
  std::string id;
  std::string title;
  std::string text;

  std::size_t char_count() const { return text.size(); }

  bool operator==(const Document&) const = default;
};

/// Sentence-aligned slice of a document; `index` is its position in the
/// document's chunk sequence.
struct Chunk {
  std::string id;
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
  std::size_t token_count = 0;
  /// Set when the chunk is a single sentence longer than the chunk limit.
  bool oversized = false;

  bool operator==(const Chunk&) const = default;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }

  bool operator==(const EmbeddingVector&) const = default;
};

struct SummaryNode {
  std::string id;
  int layer = 0;
  std::string text;
  std::size_t token_count = 0;
  EmbeddingVector embedding;
  std::vector<std::string> children;

  bool is_leaf() const { return layer == 0; }

  bool operator==(const SummaryNode&) const = default;
};

/// What happened while one summary layer was built.
struct LayerBuildRecord {
  int layer = 1;
  std::size_t input_nodes = 0;
  std::size_t cluster_count = 0;
  bool seeded = false;
  bool skipped_reduction = false;

  bool operator==(const LayerBuildRecord&) const = default;
};

struct BuildStats {
  std::map<int, std::size_t> nodes_per_layer;
  std::size_t llm_summary_calls = 0;
  double clustering_seconds = 0.0;
  double summarization_seconds = 0.0;
  double total_seconds = 0.0;
  /// "seeded-global", "global" or "hierarchical".
  std::string clustering_mode;
  std::vector<LayerBuildRecord> layer_records;
  std::vector<std::string> warnings;

  bool operator==(const BuildStats&) const = default;
};

/// Layered summary tree. Nodes are stored layer by layer; `layers()` and
/// `find()` are derived indexes rebuilt on construction.
class SummaryTree {
 public:
  SummaryTree() = default;
  SummaryTree(std::string doc_id, std::optional<std::string> question_id,
              std::vector<SummaryNode> nodes, BuildStats stats = {});

  const std::string& doc_id() const { return doc_id_; }
  const std::optional<std::string>& question_id() const { return question_id_; }
  const std::vector<SummaryNode>& nodes() const { return nodes_; }
  const BuildStats& stats() const { return stats_; }
  BuildStats& mutable_stats() { return stats_; }

  const std::map<int, std::vector<std::string>>& layers() const { return layers_; }
  std::size_t layer_size(int layer) const;
  int top_layer() const;
  bool empty() const { return nodes_.empty(); }

  /// nullptr when the id is unknown.
  const SummaryNode* find(const std::string& id) const;

  /// Throws SchemaError naming the first offending node.
  void validate() const;

  bool operator==(const SummaryTree& other) const;

 private:
  std::string doc_id_;
  std::optional<std::string> question_id_;
  std::vector<SummaryNode> nodes_;
  BuildStats stats_;
  std::map<int, std::vector<std::string>> layers_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TocEntry {
  int level = 1;
  std::string heading;

  bool operator==(const TocEntry&) const = default;
};

struct TableOfContents {
  std::vector<TocEntry> entries;
  std::string raw_text;
  /// The reply could not be parsed; `entries` holds the raw text as one entry.
  bool degraded = false;
  /// The document was cut to fit the provider context.
  bool truncated = false;

  bool empty() const { return entries.empty(); }
  /// Numbered outline used inside prompts.
  std::string render() const;
};

struct SubQuestionSet {
  std::string question_id;
  std::vector<std::string> sub_questions;
  std::vector<EmbeddingVector> embeddings;
  /// The reply yielded no sub-question and the original question stands in.
  bool fallback = false;

  std::size_t count() const { return sub_questions.size(); }
};

enum class QuestionType { kExtractive, kAbstractive, kBoolean, kUnanswerable, kUnknown };

const char* to_string(QuestionType type);
QuestionType question_type_from_string(const std::string& name);

struct QuestionRecord {
  std::string id;
  std::string doc_id;
  std::string text;
  std::vector<std::string> gold_answers;
  std::optional<std::vector<std::string>> options;
  std::optional<std::size_t> gold_option;
  std::optional<std::vector<std::string>> gold_evidence;
  std::optional<int> predicted_label;
  QuestionType type = QuestionType::kUnknown;
  bool hard = false;
};

/// The five LLM-backed pipeline steps; answering splits into free-form and
/// multiple-choice prompts.
enum class LlmStep { kToc, kClassify, kDecompose, kSummarize, kAnswerFreeform, kAnswerChoice };

const char* to_string(LlmStep step);
LlmStep llm_step_from_string(const std::string& name);

}  // namespace dtcrs
