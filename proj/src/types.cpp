#include "dtcrs/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dtcrs/error.hpp"

namespace dtcrs {

SummaryTree::SummaryTree(std::string doc_id, std::optional<std::string> question_id,
                         std::vector<SummaryNode> nodes, BuildStats stats)
    : doc_id_(std::move(doc_id)),
      question_id_(std::move(question_id)),
      nodes_(std::move(nodes)),
      stats_(std::move(stats)) {
  stats_.nodes_per_layer.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    layers_[node.layer].push_back(node.id);
    index_.emplace(node.id, i);
    ++stats_.nodes_per_layer[node.layer];
  }
}

std::size_t SummaryTree::layer_size(int layer) const {
  const auto it = layers_.find(layer);
  return it == layers_.end() ? 0 : it->second.size();
}

int SummaryTree::top_layer() const { return layers_.empty() ? -1 : layers_.rbegin()->first; }

const SummaryNode* SummaryTree::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

void SummaryTree::validate() const {
  std::unordered_set<std::string> seen;
  std::optional<std::size_t> dim;
  for (const auto& node : nodes_) {
    if (node.id.empty()) throw SchemaError("node with empty id");
    if (!seen.insert(node.id).second) throw SchemaError("duplicate node id '" + node.id + "'");
    if (node.layer < 0) throw SchemaError("node '" + node.id + "' has negative layer");
    for (double v : node.embedding.values) {
      if (!std::isfinite(v)) throw SchemaError("node '" + node.id + "' has a non-finite embedding");
    }
    if (!dim) dim = node.embedding.dim();
    if (*dim != node.embedding.dim()) {
      throw SchemaError("node '" + node.id + "' embedding dimension differs from the tree's");
    }
  }
  for (const auto& node : nodes_) {
    if (node.layer == 0) {
      if (!node.children.empty()) throw SchemaError("leaf node '" + node.id + "' has children");
      continue;
    }
    if (node.children.empty()) {
      throw SchemaError("summary node '" + node.id + "' has no children");
    }
    bool has_previous_layer_child = false;
    std::unordered_set<std::string> distinct;
    for (const auto& child_id : node.children) {
      const SummaryNode* child = find(child_id);
      if (child == nullptr) {
        throw SchemaError("node '" + node.id + "' references missing child '" + child_id + "'");
      }
      if (!distinct.insert(child_id).second) {
        throw SchemaError("node '" + node.id + "' lists child '" + child_id + "' twice");
      }
      if (child->layer >= node.layer) {
        throw SchemaError("node '" + node.id + "' has child '" + child_id +
                          "' on the same or a higher layer");
      }
      if (child->layer == node.layer - 1) has_previous_layer_child = true;
    }
    if (!has_previous_layer_child) {
      throw SchemaError("node '" + node.id + "' has no child on layer " +
                        std::to_string(node.layer - 1));
    }
  }
  std::optional<std::size_t> previous;
  for (const auto& [layer, ids] : layers_) {
    if (layer >= 2 && previous && ids.size() >= *previous) {
      throw SchemaError("layer " + std::to_string(layer) + " is not smaller than layer " +
                        std::to_string(layer - 1) + " (first node '" + ids.front() + "')");
    }
    if (layer >= 1) previous = ids.size();
  }
}

bool SummaryTree::operator==(const SummaryTree& other) const {
  return doc_id_ == other.doc_id_ && question_id_ == other.question_id_ &&
         nodes_ == other.nodes_ && stats_ == other.stats_;
}

std::string TableOfContents::render() const {
  std::string out;
  for (const auto& e : entries) {
    out.append(static_cast<std::size_t>(std::max(0, e.level - 1)) * 2, ' ');
    out += "- ";
    out += e.heading;
    out += '\n';
  }
  return out;
}

const char* to_string(QuestionType type) {
  switch (type) {
    case QuestionType::kExtractive: return "extractive";
    case QuestionType::kAbstractive: return "abstractive";
    case QuestionType::kBoolean: return "boolean";
    case QuestionType::kUnanswerable: return "unanswerable";
    case QuestionType::kUnknown: return "unknown";
  }
  return "unknown";
}

QuestionType question_type_from_string(const std::string& name) {
  if (name == "extractive") return QuestionType::kExtractive;
  if (name == "abstractive") return QuestionType::kAbstractive;
  if (name == "boolean") return QuestionType::kBoolean;
  if (name == "unanswerable") return QuestionType::kUnanswerable;
  return QuestionType::kUnknown;
}

const char* to_string(LlmStep step) {
  switch (step) {
    case LlmStep::kToc: return "toc";
    case LlmStep::kClassify: return "classify";
    case LlmStep::kDecompose: return "decompose";
    case LlmStep::kSummarize: return "summarize";
    case LlmStep::kAnswerFreeform: return "answer_freeform";
    case LlmStep::kAnswerChoice: return "answer_choice";
  }
  return "answer_freeform";
}

LlmStep llm_step_from_string(const std::string& name) {
  if (name == "toc") return LlmStep::kToc;
  if (name == "classify") return LlmStep::kClassify;
  if (name == "decompose") return LlmStep::kDecompose;
  if (name == "summarize") return LlmStep::kSummarize;
  if (name == "answer_freeform") return LlmStep::kAnswerFreeform;
  if (name == "answer_choice") return LlmStep::kAnswerChoice;
  throw ArgumentError("unknown LLM step '" + name + "'");
}

}  // namespace dtcrs
