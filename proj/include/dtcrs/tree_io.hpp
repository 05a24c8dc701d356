#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "dtcrs/types.hpp"

namespace dtcrs {

struct SerializeOptions {
  /// Wall-clock fields of BuildStats. Dropping them makes output byte-stable
  /// across runs.
  bool include_timings = true;
  int indent = -1;
};

/// Tree document: `doc_id`, `question_id`, `nodes`, `stats`, plus a `digest`
/// of the canonical content so that corrupted files are rejected instead of
/// loading as a different tree.
std::string serialize_tree(const SummaryTree& tree, const SerializeOptions& options = {});

/// Throws ParseError on malformed JSON and SchemaError on structural
/// violations (dangling children, layer rules, digest mismatch).
SummaryTree deserialize_tree(std::string_view bytes);

nlohmann::json stats_to_json(const BuildStats& stats, bool include_timings = true);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace dtcrs
