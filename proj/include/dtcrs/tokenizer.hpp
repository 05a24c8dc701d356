#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dtcrs {

/// Byte range [start, end) of one token inside the tokenized text.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Every token limit in the library (chunk size, summary length, retrieval
/// budget) is measured by the configured tokenizer.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;

  std::size_t count(std::string_view text) const { return spans(text).size(); }

  std::vector<std::string> tokens(std::string_view text) const;

  /// Cuts `text` after its first `max_tokens` tokens. The returned flag is
  /// true when anything was removed.
  std::pair<std::string, bool> truncate(std::string_view text,
                                        std::size_t max_tokens) const;
};

/// Deterministic word-and-punctuation tokenizer: runs of letters/digits
/// (including any non-ASCII code point that is not general punctuation) form
/// one token, every other non-space character is a token of its own.
class WordPunctTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> spans(std::string_view text) const override;
};

std::shared_ptr<const Tokenizer> default_tokenizer();

}  // namespace dtcrs
