#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtcrs/datasets.hpp"
#include "dtcrs/retrieval.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

/// What the system produced for one question.
struct Prediction {
  std::string question_id;
  std::string text;
  std::optional<std::size_t> choice;
  /// The run failed; free-form metrics score an empty answer and multiple
  /// choice counts it as unanswered.
  bool failed = false;
};

struct QuestionScores {
  std::string question_id;
  QuestionType type = QuestionType::kUnknown;
  /// Metric name -> score.
  std::map<std::string, double> scores;
};

/// Metric names: "f1", "rouge_l", "bleu1", "bleu4", "meteor" for free-form
/// answers; "accuracy" and "sat_style" for multiple choice. Per question,
/// sat_style is 1 when correct, -1/(k-1) when wrong and 0 when unanswered,
/// so its mean is (C - W/(k-1)) / N.
struct MetricReport {
  std::string dataset;
  std::string variant;
  /// Sorted by question id.
  std::vector<QuestionScores> per_question;
  /// Mean of each metric over all questions.
  std::map<std::string, double> aggregates;
  /// Means restricted to each known question type present.
  std::map<std::string, std::map<std::string, double>> per_type;
  std::size_t failed = 0;

  std::vector<std::string> metric_names() const;
};

/// Scores predictions against the question records they name. Throws
/// ArgumentError for a prediction whose question is unknown. Questions with
/// no prediction are scored as failed.
MetricReport score_predictions(DatasetKind kind, const std::vector<QuestionRecord>& questions,
                               const std::vector<Prediction>& predictions);

nlohmann::json to_json(const MetricReport& report);
/// One row per question: question_id, type, then every metric column.
void write_csv(const MetricReport& report, std::ostream& out);

struct TreeStatsReport {
  std::size_t tree_count = 0;
  /// Layer -> nodes in that layer averaged over all trees (a tree without
  /// the layer contributes 0).
  std::map<int, double> avg_nodes_per_layer;
  /// Layer -> share of evidence-bearing retrieved nodes found in that layer.
  /// Empty when no retrieved node matched any gold evidence.
  std::optional<std::map<int, double>> evidence_coverage_per_layer;
  /// Mean tree construction time, excluding chunking and embedding.
  double build_seconds = 0.0;
};

/// `retrievals[i]` is scored against `gold_evidence[i]`; a retrieved node is
/// an evidence node when its normalized text contains any normalized gold
/// evidence string. Throws ArgumentError when the two lists differ in length.
TreeStatsReport tree_stats(const std::vector<const SummaryTree*>& trees,
                           const std::vector<RetrievalResult>& retrievals,
                           const std::vector<std::vector<std::string>>& gold_evidence);

nlohmann::json to_json(const TreeStatsReport& report);

}  // namespace dtcrs
