#include "dtcrs/datasets.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "dtcrs/error.hpp"

namespace dtcrs {

namespace {

using nlohmann::json;

std::string str_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) throw SchemaError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::string opt_str(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it != obj.end() && it->is_string() ? it->get<std::string>() : std::string();
}

const json& array_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) throw SchemaError(std::string("missing array field '") + key + "'");
  return *it;
}

void skip(Dataset& ds, const std::string& where, const std::exception& e) {
  ++ds.skipped_records;
  ds.warnings.push_back(where + ": skipped (" + e.what() + ")");
}

struct QasperAnswer {
  std::string text;
  QuestionType type;
  std::vector<std::string> evidence;
};

QasperAnswer qasper_answer(const json& wrapper) {
  const json& a = wrapper.contains("answer") ? wrapper.at("answer") : wrapper;
  if (!a.is_object()) throw SchemaError("answer is not an object");
  QasperAnswer out;
  if (a.contains("evidence") && a.at("evidence").is_array()) {
    for (const auto& e : a.at("evidence"))
      if (e.is_string() && !e.get<std::string>().empty()) out.evidence.push_back(e.get<std::string>());
  }
  if (a.value("unanswerable", false)) {
    out.text = "Unanswerable";
    out.type = QuestionType::kUnanswerable;
    return out;
  }
  if (a.contains("yes_no") && a.at("yes_no").is_boolean()) {
    out.text = a.at("yes_no").get<bool>() ? "Yes" : "No";
    out.type = QuestionType::kBoolean;
    return out;
  }
  if (a.contains("extractive_spans") && a.at("extractive_spans").is_array() && !a.at("extractive_spans").empty()) {
    for (const auto& s : a.at("extractive_spans")) {
      if (!s.is_string()) throw SchemaError("extractive span is not a string");
      out.text += (out.text.empty() ? "" : ", ") + s.get<std::string>();
    }
    out.type = QuestionType::kExtractive;
    return out;
  }
  out.text = opt_str(a, "free_form_answer");
  if (out.text.empty()) throw SchemaError("answer has no content");
  out.type = QuestionType::kAbstractive;
  return out;
}

std::string qasper_text(const json& paper) {
  std::string text;
  auto add = [&](const std::string& s) {
    if (s.empty()) return;
    if (!text.empty()) text += "\n\n";
    text += s;
  };
  const std::string abstract = opt_str(paper, "abstract");
  if (!abstract.empty()) add("Abstract\n" + abstract);
  if (paper.contains("full_text") && paper.at("full_text").is_array()) {
    for (const auto& section : paper.at("full_text")) {
      std::string body;
      if (section.contains("paragraphs") && section.at("paragraphs").is_array()) {
        for (const auto& p : section.at("paragraphs")) {
          if (!p.is_string() || p.get<std::string>().empty()) continue;
          body += (body.empty() ? "" : "\n") + p.get<std::string>();
        }
      }
      const std::string name = opt_str(section, "section_name");
      add(name.empty() ? body : name + "\n" + body);
    }
  }
  return text;
}

json parse_line(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

const char* to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kQasper: return "qasper";
    case DatasetKind::kQuality: return "quality";
    case DatasetKind::kNarrativeQa: return "narrativeqa";
  }
  return "qasper";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
  if (name == "qasper") return DatasetKind::kQasper;
  if (name == "quality") return DatasetKind::kQuality;
  if (name == "narrativeqa") return DatasetKind::kNarrativeQa;
  throw ArgumentError("unknown dataset kind '" + name + "'");
}

const Document* Dataset::document(const std::string& id) const {
  for (const auto& d : documents)
    if (d.id == id) return &d;
  return nullptr;
}

Dataset parse_qasper(const json& root) {
  Dataset ds;
  ds.kind = DatasetKind::kQasper;
  if (!root.is_object()) throw DataError("QASPER file must hold a JSON object keyed by paper id");
  for (const auto& [paper_id, paper] : root.items()) {
    Document doc;
    try {
      if (!paper.is_object()) throw SchemaError("paper is not an object");
      doc.id = paper_id;
      doc.title = opt_str(paper, "title");
      doc.text = qasper_text(paper);
      if (doc.text.empty()) throw SchemaError("paper has no text");
    } catch (const Error& e) {
      skip(ds, "paper " + paper_id, e);
      continue;
    }
    std::size_t kept = 0;
    const json empty = json::array();
    const json& qas = paper.contains("qas") && paper.at("qas").is_array() ? paper.at("qas") : empty;
    for (std::size_t qi = 0; qi < qas.size(); ++qi) {
      const json& qa = qas[qi];
      const std::string where = "paper " + paper_id + " question " + std::to_string(qi);
      try {
        QuestionRecord q;
        q.doc_id = doc.id;
        q.text = str_field(qa, "question");
        q.id = opt_str(qa, "question_id");
        if (q.id.empty()) q.id = paper_id + "-q" + std::to_string(qi);
        std::vector<std::string> evidence;
        for (const auto& wrapper : array_field(qa, "answers")) {
          QasperAnswer a = qasper_answer(wrapper);
          if (q.gold_answers.empty()) q.type = a.type;
          q.gold_answers.push_back(std::move(a.text));
          evidence.insert(evidence.end(), a.evidence.begin(), a.evidence.end());
        }
        if (q.gold_answers.empty()) throw SchemaError("no answers");
        if (!evidence.empty()) q.gold_evidence = std::move(evidence);
        ds.questions.push_back(std::move(q));
        ++kept;
      } catch (const Error& e) {
        skip(ds, where, e);
      } catch (const json::exception& e) {
        skip(ds, where, e);
      }
    }
    if (kept > 0) ds.documents.push_back(std::move(doc));
  }
  return ds;
}

Dataset parse_quality(std::istream& in) {
  Dataset ds;
  ds.kind = DatasetKind::kQuality;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = "line " + std::to_string(line_no);
    Document doc;
    json rec;
    try {
      rec = parse_line(line);
      if (!rec.is_object()) throw SchemaError("record is not an object");
      doc.id = opt_str(rec, "article_id");
      if (doc.id.empty()) doc.id = str_field(rec, "set_unique_id");
      doc.title = opt_str(rec, "title");
      doc.text = str_field(rec, "article");
      if (doc.text.empty()) throw SchemaError("empty article");
      array_field(rec, "questions");
    } catch (const Error& e) {
      skip(ds, where, e);
      continue;
    }
    const bool seen = ds.document(doc.id) != nullptr;
    std::size_t kept = 0;
    const json& qs = rec.at("questions");
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      const std::string qwhere = where + " question " + std::to_string(qi);
      try {
        const json& qj = qs[qi];
        QuestionRecord q;
        q.doc_id = doc.id;
        q.text = str_field(qj, "question");
        q.id = opt_str(qj, "question_unique_id");
        if (q.id.empty()) q.id = doc.id + "-q" + std::to_string(qi);
        std::vector<std::string> options;
        for (const auto& o : array_field(qj, "options")) {
          if (!o.is_string()) throw SchemaError("option is not a string");
          options.push_back(o.get<std::string>());
        }
        if (options.size() < 2) throw SchemaError("fewer than two options");
        const auto label = qj.find("gold_label");
        if (label == qj.end() || !label->is_number_integer()) throw SchemaError("no gold_label");
        const auto g = label->get<long long>();
        if (g < 1 || static_cast<std::size_t>(g) > options.size()) throw SchemaError("gold_label out of range");
        q.gold_option = static_cast<std::size_t>(g - 1);
        q.gold_answers = {options[*q.gold_option]};
        q.options = std::move(options);
        q.hard = qj.value("difficult", 0) != 0;
        ds.questions.push_back(std::move(q));
        ++kept;
      } catch (const Error& e) {
        skip(ds, qwhere, e);
      } catch (const json::exception& e) {
        skip(ds, qwhere, e);
      }
    }
    if (kept > 0 && !seen) ds.documents.push_back(std::move(doc));
  }
  return ds;
}

Dataset parse_narrativeqa(std::istream& in) {
  Dataset ds;
  ds.kind = DatasetKind::kNarrativeQa;
  std::map<std::string, std::size_t> per_doc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = "line " + std::to_string(line_no);
    try {
      const json rec = parse_line(line);
      if (!rec.is_object() || !rec.contains("document") || !rec.at("document").is_object()) {
        throw SchemaError("missing document object");
      }
      const json& dj = rec.at("document");
      Document doc;
      doc.id = str_field(dj, "id");
      doc.text = str_field(dj, "text");
      if (doc.text.empty()) throw SchemaError("empty document text");
      if (dj.contains("summary") && dj.at("summary").is_object()) doc.title = opt_str(dj.at("summary"), "title");

      QuestionRecord q;
      q.doc_id = doc.id;
      const json& qj = rec.at("question");
      q.text = qj.is_string() ? qj.get<std::string>() : str_field(qj, "text");
      for (const auto& a : array_field(rec, "answers")) {
        const std::string text = a.is_string() ? a.get<std::string>() : str_field(a, "text");
        if (!text.empty()) q.gold_answers.push_back(text);
      }
      if (q.gold_answers.empty()) throw SchemaError("no answers");
      q.id = doc.id + "-q" + std::to_string(per_doc[doc.id]++);
      if (ds.document(doc.id) == nullptr) ds.documents.push_back(std::move(doc));
      ds.questions.push_back(std::move(q));
    } catch (const Error& e) {
      skip(ds, where, e);
    } catch (const json::exception& e) {
      skip(ds, where, e);
    }
  }
  return ds;
}

Dataset load_dataset(DatasetKind kind, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  if (blank(content)) {
    Dataset ds;
    ds.kind = kind;
    ds.warnings.push_back("dataset file '" + path + "' is empty");
    return ds;
  }
  Dataset ds;
  if (kind == DatasetKind::kQasper) {
    json root;
    try {
      root = json::parse(content);
    } catch (const json::parse_error& e) {
      throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
    ds = parse_qasper(root);
  } else {
    std::istringstream lines(content);
    ds = kind == DatasetKind::kQuality ? parse_quality(lines) : parse_narrativeqa(lines);
  }
  if (ds.skipped_records > 0) {
    ds.warnings.push_back(std::to_string(ds.skipped_records) + " malformed record(s) skipped");
  }
  return ds;
}

}  // namespace dtcrs
