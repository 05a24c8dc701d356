#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtcrs/types.hpp"

namespace dtcrs {

enum class DatasetKind { kQasper, kQuality, kNarrativeQa };

const char* to_string(DatasetKind kind);
/// Accepts "qasper", "quality", "narrativeqa"; throws ArgumentError otherwise.
DatasetKind dataset_kind_from_string(const std::string& name);

struct Dataset {
  DatasetKind kind = DatasetKind::kQasper;
  std::vector<Document> documents;
  std::vector<QuestionRecord> questions;
  /// One line per skipped record or notable condition.
  std::vector<std::string> warnings;
  std::size_t skipped_records = 0;

  /// nullptr when no document has `id`.
  const Document* document(const std::string& id) const;
};

/// QASPER release format: an object keyed by paper id, each holding `title`,
/// `abstract`, `full_text` sections and `qas`. The document text is the
/// abstract and sections, each under its section name on its own line.
/// Gold answers collect every annotator's answer: "Unanswerable", "Yes"/"No",
/// extractive spans joined with ", ", or the free-form text. The question
/// type follows the first annotator's answer.
Dataset parse_qasper(const nlohmann::json& root);

/// QuALITY JSONL: one article per line with `questions`, each holding four
/// `options` and a 1-based `gold_label`. Questions without a label are
/// skipped.
Dataset parse_quality(std::istream& in);

/// NarrativeQA JSONL in the Hugging Face layout: one question per line with
/// `document`, `question` and `answers`. Documents repeat across lines and
/// are kept once.
Dataset parse_narrativeqa(std::istream& in);

/// Reads `path` (throws DataError when unreadable or, for QASPER, not JSON).
/// An empty file yields an empty dataset with a warning.
Dataset load_dataset(DatasetKind kind, const std::string& path);

}  // namespace dtcrs
