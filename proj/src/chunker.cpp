#include "dtcrs/chunker.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <string>

#include "dtcrs/error.hpp"

namespace dtcrs {

namespace {

constexpr std::array<std::string_view, 43> kAbbreviations = {
    "mr",   "mrs",  "ms",   "dr",  "prof", "sr",   "jr",    "st",   "vs",  "etc", "e.g",
    "i.e",  "fig",  "figs", "eq",  "eqs",  "no",   "nos",   "al",   "approx", "dept", "est",
    "inc",  "ltd",  "co",   "corp", "jan", "feb",  "mar",   "apr",  "jun", "jul", "aug",
    "sep",  "sept", "oct",  "nov", "dec",  "u.s",  "u.k",   "ph.d", "cf",  "resp"};

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Length of a closing quote/bracket at `pos`, 0 when there is none.
std::size_t closer_length(std::string_view text, std::size_t pos) {
  const char c = text[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') return 1;
  // U+2019 and U+201D.
  if (pos + 2 < text.size() && static_cast<unsigned char>(c) == 0xE2 &&
      static_cast<unsigned char>(text[pos + 1]) == 0x80) {
    const auto third = static_cast<unsigned char>(text[pos + 2]);
    if (third == 0x99 || third == 0x9D) return 3;
  }
  return 0;
}

bool is_abbreviation_before(std::string_view text, std::size_t period) {
  std::size_t begin = period;
  while (begin > 0 && !is_space(static_cast<unsigned char>(text[begin - 1]))) --begin;
  std::string word;
  for (std::size_t i = begin; i < period; ++i) {
    word += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
  }
  // Strip opening punctuation such as "(" or quotes.
  std::size_t lead = 0;
  while (lead < word.size() && !std::isalnum(static_cast<unsigned char>(word[lead]))) ++lead;
  word.erase(0, lead);
  if (word.empty()) return false;
  for (auto abbr : kAbbreviations) {
    if (word == abbr) return true;
  }
  return false;
}

}  // namespace

std::vector<SentenceSpan> split_sentences(std::string_view text, const Tokenizer& tokenizer) {
  std::vector<SentenceSpan> out;
  std::size_t pos = 0;
  auto emit = [&](std::size_t start, std::size_t end) {
    while (end > start && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
    if (end > start) out.push_back({start, end, tokenizer.count(text.substr(start, end - start))});
  };
  while (pos < text.size()) {
    while (pos < text.size() && is_space(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= text.size()) break;
    const std::size_t start = pos;
    std::size_t end = text.size();
    while (pos < text.size()) {
      if (!is_terminator(text[pos])) {
        ++pos;
        continue;
      }
      const std::size_t term = pos;
      while (pos < text.size() && is_terminator(text[pos])) ++pos;
      while (pos < text.size()) {
        const std::size_t len = closer_length(text, pos);
        if (len == 0) break;
        pos += len;
      }
      const bool at_break = pos >= text.size() || is_space(static_cast<unsigned char>(text[pos]));
      if (!at_break) continue;
      if (text[term] == '.' && pos - term == 1 && is_abbreviation_before(text, term)) continue;
      end = pos;
      break;
    }
    emit(start, end);
    pos = end;
  }
  return out;
}

std::string chunk_id(const std::string& doc_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return doc_id + ":" + buf;
}

ChunkResult chunk_document(const Document& document, std::size_t limit,
                           const Tokenizer& tokenizer) {
  if (limit == 0) throw ArgumentError("chunk limit must be > 0");
  ChunkResult result;
  const auto sentences = split_sentences(document.text, tokenizer);
  std::size_t first = 0;
  std::size_t tokens = 0;
  std::size_t count = 0;
  auto flush = [&](std::size_t last_exclusive, bool oversized) {
    if (count == 0) return;
    const std::size_t start = sentences[first].start;
    const std::size_t end = sentences[last_exclusive - 1].end;
    Chunk c;
    c.index = result.chunks.size();
    c.id = chunk_id(document.id, c.index);
    c.doc_id = document.id;
    c.text = document.text.substr(start, end - start);
    c.token_count = tokens;
    c.oversized = oversized;
    result.chunks.push_back(std::move(c));
    first = last_exclusive;
    tokens = 0;
    count = 0;
  };
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const std::size_t t = sentences[i].token_count;
    if (t > limit) {
      flush(i, false);
      first = i;
      tokens = t;
      count = 1;
      flush(i + 1, true);
      result.warnings.push_back("sentence at byte " + std::to_string(sentences[i].start) + " has " +
                                std::to_string(t) + " tokens, above the chunk limit of " +
                                std::to_string(limit));
      continue;
    }
    if (tokens + t > limit) flush(i, false);
    if (count == 0) first = i;
    tokens += t;
    ++count;
  }
  flush(sentences.size(), false);
  return result;
}

}  // namespace dtcrs
