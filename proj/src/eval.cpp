#include "dtcrs/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <unordered_map>

#include "dtcrs/error.hpp"
#include "dtcrs/metrics.hpp"

namespace dtcrs {

namespace {

std::map<std::string, double> score_one(DatasetKind kind, const QuestionRecord& q, const Prediction* p) {
  std::map<std::string, double> s;
  if (q.options && q.gold_option) {
    const std::size_t k = q.options->size();
    const bool answered = p != nullptr && !p->failed && p->choice.has_value();
    const bool correct = answered && *p->choice == *q.gold_option;
    s["accuracy"] = correct ? 1.0 : 0.0;
    s["sat_style"] = correct ? 1.0 : (answered ? -1.0 / static_cast<double>(k - 1) : 0.0);
    return s;
  }
  const std::string text = p != nullptr && !p->failed ? p->text : std::string();
  s["f1"] = token_f1(text, q.gold_answers);
  if (kind != DatasetKind::kQasper) {
    s["rouge_l"] = rouge_l(text, q.gold_answers);
    s["bleu1"] = bleu(text, q.gold_answers, 1);
    s["bleu4"] = bleu(text, q.gold_answers, 4);
    s["meteor"] = meteor(text, q.gold_answers);
  }
  return s;
}

std::map<std::string, double> means(const std::vector<const QuestionScores*>& rows) {
  std::map<std::string, double> sum;
  std::map<std::string, std::size_t> count;
  for (const auto* r : rows) {
    for (const auto& [name, v] : r->scores) {
      sum[name] += v;
      ++count[name];
    }
  }
  for (auto& [name, v] : sum) v /= static_cast<double>(count[name]);
  return sum;
}

}  // namespace

std::vector<std::string> MetricReport::metric_names() const {
  std::set<std::string> names;
  for (const auto& q : per_question)
    for (const auto& [name, v] : q.scores) names.insert(name);
  return {names.begin(), names.end()};
}

MetricReport score_predictions(DatasetKind kind, const std::vector<QuestionRecord>& questions,
                               const std::vector<Prediction>& predictions) {
  std::unordered_map<std::string, const Prediction*> by_id;
  std::set<std::string> known;
  for (const auto& q : questions) known.insert(q.id);
  for (const auto& p : predictions) {
    if (!known.count(p.question_id)) throw ArgumentError("prediction for unknown question '" + p.question_id + "'");
    by_id[p.question_id] = &p;
  }

  MetricReport report;
  report.dataset = to_string(kind);
  for (const auto& q : questions) {
    const auto it = by_id.find(q.id);
    const Prediction* p = it == by_id.end() ? nullptr : it->second;
    if (p == nullptr || p->failed) ++report.failed;
    report.per_question.push_back({q.id, q.type, score_one(kind, q, p)});
  }
  std::sort(report.per_question.begin(), report.per_question.end(),
            [](const QuestionScores& a, const QuestionScores& b) { return a.question_id < b.question_id; });

  std::vector<const QuestionScores*> all;
  std::map<std::string, std::vector<const QuestionScores*>> typed;
  for (const auto& row : report.per_question) {
    all.push_back(&row);
    if (row.type != QuestionType::kUnknown) typed[to_string(row.type)].push_back(&row);
  }
  report.aggregates = means(all);
  for (const auto& [type, rows] : typed) report.per_type[type] = means(rows);
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json j;
  j["dataset"] = report.dataset;
  j["variant"] = report.variant;
  j["failed"] = report.failed;
  j["aggregates"] = report.aggregates;
  j["per_type"] = report.per_type;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& q : report.per_question) {
    rows.push_back({{"question_id", q.question_id}, {"type", to_string(q.type)}, {"scores", q.scores}});
  }
  j["per_question"] = std::move(rows);
  return j;
}

void write_csv(const MetricReport& report, std::ostream& out) {
  const auto names = report.metric_names();
  out << "question_id,type";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  const auto flags = out.flags();
  out << std::setprecision(6) << std::fixed;
  for (const auto& q : report.per_question) {
    std::string id = q.question_id;
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : id) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      id = quoted + "\"";
    }
    out << id << ',' << to_string(q.type);
    for (const auto& n : names) {
      out << ',';
      const auto it = q.scores.find(n);
      if (it != q.scores.end()) out << it->second;
    }
    out << '\n';
  }
  out.flags(flags);
}

TreeStatsReport tree_stats(const std::vector<const SummaryTree*>& trees,
                           const std::vector<RetrievalResult>& retrievals,
                           const std::vector<std::vector<std::string>>& gold_evidence) {
  if (retrievals.size() != gold_evidence.size()) {
    throw ArgumentError("tree_stats: one evidence list per retrieval required");
  }
  TreeStatsReport report;
  report.tree_count = trees.size();
  for (const auto* t : trees) {
    for (const auto& [layer, ids] : t->layers()) report.avg_nodes_per_layer[layer] += static_cast<double>(ids.size());
    report.build_seconds += t->stats().total_seconds;
  }
  if (!trees.empty()) {
    const auto n = static_cast<double>(trees.size());
    for (auto& [layer, v] : report.avg_nodes_per_layer) v /= n;
    report.build_seconds /= n;
  }

  std::map<int, double> hits;
  double total = 0.0;
  for (std::size_t i = 0; i < retrievals.size(); ++i) {
    std::vector<std::string> evidence;
    for (const auto& e : gold_evidence[i]) {
      std::string norm = normalize_answer(e);
      if (!norm.empty()) evidence.push_back(std::move(norm));
    }
    if (evidence.empty()) continue;
    for (const auto& item : retrievals[i].items) {
      const std::string text = normalize_answer(item.text);
      const bool match = std::any_of(evidence.begin(), evidence.end(),
                                     [&](const std::string& e) { return text.find(e) != std::string::npos; });
      if (match) {
        hits[item.layer] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total > 0.0) {
    for (auto& [layer, v] : hits) v /= total;
    report.evidence_coverage_per_layer = std::move(hits);
  }
  return report;
}

nlohmann::json to_json(const TreeStatsReport& report) {
  nlohmann::json j;
  j["tree_count"] = report.tree_count;
  nlohmann::json avg = nlohmann::json::object();
  for (const auto& [layer, v] : report.avg_nodes_per_layer) avg[std::to_string(layer)] = v;
  j["avg_nodes_per_layer"] = std::move(avg);
  if (report.evidence_coverage_per_layer) {
    nlohmann::json cov = nlohmann::json::object();
    for (const auto& [layer, v] : *report.evidence_coverage_per_layer) cov[std::to_string(layer)] = v;
    j["evidence_coverage_per_layer"] = std::move(cov);
  } else {
    j["evidence_coverage_per_layer"] = nullptr;
  }
  j["build_seconds"] = report.build_seconds;
  return j;
}

}  // namespace dtcrs
