#include "dtcrs/tree_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dtcrs/error.hpp"

namespace dtcrs {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json stats_to_json(const BuildStats& stats, bool include_timings) {
  json per_layer = json::object();
  for (const auto& [layer, count] : stats.nodes_per_layer) per_layer[std::to_string(layer)] = count;
  json records = json::array();
  for (const auto& r : stats.layer_records) {
    records.push_back({{"layer", r.layer},
                       {"input_nodes", r.input_nodes},
                       {"cluster_count", r.cluster_count},
                       {"seeded", r.seeded},
                       {"skipped_reduction", r.skipped_reduction}});
  }
  json j = {{"nodes_per_layer", per_layer},
            {"llm_summary_calls", stats.llm_summary_calls},
            {"clustering_mode", stats.clustering_mode},
            {"layer_records", records},
            {"warnings", stats.warnings}};
  if (include_timings) {
    j["clustering_seconds"] = stats.clustering_seconds;
    j["summarization_seconds"] = stats.summarization_seconds;
    j["total_seconds"] = stats.total_seconds;
  }
  return j;
}

namespace {

json content_json(const SummaryTree& tree, bool include_timings) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"layer", n.layer},
                     {"text", n.text},
                     {"token_count", n.token_count},
                     {"embedding", n.embedding.values},
                     {"children", n.children}});
  }
  return {{"doc_id", tree.doc_id()},
          {"question_id", tree.question_id() ? json(*tree.question_id()) : json(nullptr)},
          {"nodes", nodes},
          {"stats", stats_to_json(tree.stats(), include_timings)}};
}

std::string digest_of(const json& content) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(content.dump())));
  return buf;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + " is missing field '" + key + "'");
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + " field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::size_t get_count(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_unsigned()) {
    throw SchemaError(where + " field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double get_real(const json& obj, const char* key, double fallback, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw SchemaError(where + " field '" + key + "' must be a number");
  return it->get<double>();
}

bool get_bool(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_boolean()) throw SchemaError(where + " field '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<std::string> get_strings(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array()) throw SchemaError(where + " field '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw SchemaError(where + " field '" + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

BuildStats parse_stats(const json& j) {
  const std::string where = "stats";
  if (!j.is_object()) throw SchemaError("stats must be an object");
  BuildStats s;
  const json& per_layer = field(j, "nodes_per_layer", where);
  if (!per_layer.is_object()) throw SchemaError("stats.nodes_per_layer must be an object");
  for (const auto& [key, value] : per_layer.items()) {
    if (!value.is_number_unsigned()) throw SchemaError("stats.nodes_per_layer values must be counts");
    int layer = 0;
    try {
      std::size_t used = 0;
      layer = std::stoi(key, &used);
      if (used != key.size() || std::to_string(layer) != key) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw SchemaError("stats.nodes_per_layer key '" + key + "' is not a layer number");
    }
    s.nodes_per_layer[layer] = value.get<std::size_t>();
  }
  s.llm_summary_calls = get_count(j, "llm_summary_calls", where);
  s.clustering_mode = get_string(j, "clustering_mode", where);
  s.clustering_seconds = get_real(j, "clustering_seconds", 0.0, where);
  s.summarization_seconds = get_real(j, "summarization_seconds", 0.0, where);
  s.total_seconds = get_real(j, "total_seconds", 0.0, where);
  const json& records = field(j, "layer_records", where);
  if (!records.is_array()) throw SchemaError("stats.layer_records must be an array");
  for (const auto& r : records) {
    if (!r.is_object()) throw SchemaError("stats.layer_records entries must be objects");
    LayerBuildRecord rec;
    const json& layer = field(r, "layer", "layer record");
    if (!layer.is_number_integer()) throw SchemaError("layer record 'layer' must be an integer");
    rec.layer = layer.get<int>();
    rec.input_nodes = get_count(r, "input_nodes", "layer record");
    rec.cluster_count = get_count(r, "cluster_count", "layer record");
    rec.seeded = get_bool(r, "seeded", "layer record");
    rec.skipped_reduction = get_bool(r, "skipped_reduction", "layer record");
    if (rec.layer < 1 || rec.cluster_count > rec.input_nodes) {
      throw SchemaError("layer record for layer " + std::to_string(rec.layer) + " is inconsistent");
    }
    s.layer_records.push_back(rec);
  }
  s.warnings = get_strings(j, "warnings", where);
  return s;
}

}  // namespace

std::string serialize_tree(const SummaryTree& tree, const SerializeOptions& options) {
  json doc = content_json(tree, options.include_timings);
  doc["digest"] = digest_of(doc);
  return doc.dump(options.indent);
}

SummaryTree deserialize_tree(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("tree JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("tree document must be a JSON object");
  const std::string doc_id = get_string(doc, "doc_id", "tree");
  std::optional<std::string> question_id;
  const json& q = field(doc, "question_id", "tree");
  if (q.is_string()) {
    question_id = q.get<std::string>();
  } else if (!q.is_null()) {
    throw SchemaError("tree field 'question_id' must be a string or null");
  }
  const json& nodes_json = field(doc, "nodes", "tree");
  if (!nodes_json.is_array()) throw SchemaError("tree field 'nodes' must be an array");
  std::vector<SummaryNode> nodes;
  nodes.reserve(nodes_json.size());
  for (std::size_t i = 0; i < nodes_json.size(); ++i) {
    const json& nj = nodes_json[i];
    const std::string where = "node #" + std::to_string(i);
    if (!nj.is_object()) throw SchemaError(where + " must be an object");
    SummaryNode node;
    node.id = get_string(nj, "id", where);
    const std::string named = "node '" + node.id + "'";
    const json& layer = field(nj, "layer", named);
    if (!layer.is_number_integer()) throw SchemaError(named + " field 'layer' must be an integer");
    node.layer = layer.get<int>();
    node.text = get_string(nj, "text", named);
    node.token_count = get_count(nj, "token_count", named);
    const json& emb = field(nj, "embedding", named);
    if (!emb.is_array()) throw SchemaError(named + " field 'embedding' must be an array");
    for (const auto& v : emb) {
      if (!v.is_number()) throw SchemaError(named + " embedding must hold numbers");
      node.embedding.values.push_back(v.get<double>());
    }
    node.children = get_strings(nj, "children", named);
    nodes.push_back(std::move(node));
  }
  BuildStats stats = parse_stats(field(doc, "stats", "tree"));
  const auto declared_counts = stats.nodes_per_layer;
  const bool had_timings = doc["stats"].contains("total_seconds");

  SummaryTree tree(doc_id, question_id, std::move(nodes), std::move(stats));
  tree.validate();
  if (declared_counts != tree.stats().nodes_per_layer) {
    throw SchemaError("stats.nodes_per_layer disagrees with the node list");
  }
  if (const auto it = doc.find("digest"); it != doc.end()) {
    if (!it->is_string()) throw SchemaError("tree field 'digest' must be a string");
    if (digest_of(content_json(tree, had_timings)) != it->get<std::string>()) {
      throw SchemaError("tree digest mismatch: content was modified");
    }
  }
  return tree;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace dtcrs
