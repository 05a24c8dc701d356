#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dtcrs/tokenizer.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t token_count = 0;

  bool operator==(const SentenceSpan&) const = default;
};

/// Rule-based sentence splitter. A sentence ends at `.`, `!` or `?` (plus
/// any closing quotes or brackets) followed by whitespace or end of text,
/// unless the word before the period is a known abbreviation or the period
/// sits inside a number.
std::vector<SentenceSpan> split_sentences(std::string_view text,
                                          const Tokenizer& tokenizer = *default_tokenizer());

struct ChunkResult {
  std::vector<Chunk> chunks;
  /// One entry per sentence that alone exceeds the limit.
  std::vector<std::string> warnings;
};

/// Greedy sentence packing: each chunk is the longest run of consecutive
/// sentences that fits `limit`; a sentence that would cross the boundary
/// starts the next chunk whole. A sentence longer than `limit` becomes a
/// chunk of its own and is reported in `warnings`.
ChunkResult chunk_document(const Document& document, std::size_t limit,
                           const Tokenizer& tokenizer = *default_tokenizer());

/// Chunk id for position `index` of `doc_id`.
std::string chunk_id(const std::string& doc_id, std::size_t index);

}  // namespace dtcrs
