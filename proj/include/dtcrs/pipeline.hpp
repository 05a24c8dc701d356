#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtcrs/config.hpp"
#include "dtcrs/datasets.hpp"
#include "dtcrs/embedding.hpp"
#include "dtcrs/eval.hpp"
#include "dtcrs/llm.hpp"
#include "dtcrs/retrieval.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

enum class Route { kTree, kDpr };
const char* to_string(Route route);

enum class AblationVariant { kFull, kNoGlobal, kNoClassify, kNoToc };
const char* to_string(AblationVariant variant);
/// Accepts "full", "no_global", "no_classify", "no_toc"; throws
/// ArgumentError otherwise.
AblationVariant ablation_variant_from_string(const std::string& name);
/// `config` with the switch for `variant` turned on.
PipelineConfig apply_variant(PipelineConfig config, AblationVariant variant);

/// A document split into chunks and embedded, shared by all its questions.
struct PreparedDocument {
  Document document;
  std::vector<Chunk> chunks;
  EmbeddingBatch embeddings;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

struct AnswerRecord {
  std::string question_id;
  std::string doc_id;
  Route route = Route::kDpr;
  /// Classifier output; empty when classification was skipped.
  std::optional<int> label;
  std::vector<std::string> sub_questions;
  RetrievalResult retrieval;
  std::string answer;
  std::optional<std::size_t> choice;
  /// Phase name -> seconds: toc, classify, decompose, build, retrieve,
  /// answer, total. Phases that did not run are absent.
  std::map<std::string, double> timings;
  /// "<doc id>/<question id>" for tree-routed questions.
  std::optional<std::string> tree_ref;
  /// The dynamic tree, or the layers finished before a failure.
  std::optional<SummaryTree> tree;
  std::vector<std::string> warnings;
  std::optional<std::string> error;
  std::optional<std::string> error_phase;

  bool ok() const { return !error.has_value(); }
  Prediction prediction() const;
};

nlohmann::json to_json(const AnswerRecord& record, bool include_timings = true);

/// classify -> (dynamic tree + collapsed retrieval | DPR) -> answer.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<LlmProvider> llm,
           std::shared_ptr<const EmbeddingProvider> embedder,
           PromptTemplates templates = PromptTemplates::builtin());

  /// Providers and prompt templates built from `config.providers`.
  static Pipeline from_config(const PipelineConfig& config);

  /// Chunks and embeds. Throws DataError for a document without text.
  PreparedDocument prepare(const Document& document) const;

  /// Runs one question. Provider failures become an error record tagged
  /// with the failing phase rather than an exception. Randomness is seeded
  /// from (rng_seed, question id), so results do not depend on call order.
  AnswerRecord answer_question(const QuestionRecord& question, const PreparedDocument& document);

  const PipelineConfig& config() const { return config_; }
  LlmGateway& gateway() { return *gateway_; }
  const EmbeddingProvider& embedder() const { return *embedder_; }

 private:
  PipelineConfig config_;
  std::shared_ptr<const EmbeddingProvider> embedder_;
  std::unique_ptr<LlmGateway> gateway_;
};

struct EvaluationRun {
  AblationVariant variant = AblationVariant::kFull;
  /// Sorted by question id.
  std::vector<AnswerRecord> records;
  MetricReport report;
  TreeStatsReport tree_stats;
};

/// Answers every question of `dataset` under `variant`, `config.jobs`
/// questions at a time, and scores the results.
EvaluationRun run_ablation(AblationVariant variant, const Dataset& dataset, const PipelineConfig& config,
                           std::shared_ptr<LlmProvider> llm, std::shared_ptr<const EmbeddingProvider> embedder,
                           PromptTemplates templates = PromptTemplates::builtin());

}  // namespace dtcrs
