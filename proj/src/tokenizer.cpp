#include "dtcrs/tokenizer.hpp"

#include <cctype>

namespace dtcrs {

namespace {

enum class CharClass { kSpace, kWord, kPunct };

// Length of the UTF-8 sequence starting with `lead`; malformed leads count as 1.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

CharClass classify(std::string_view text, std::size_t pos, std::size_t len) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  if (len == 1) {
    if (lead >= 0x80) return CharClass::kWord;
    if (std::isspace(lead)) return CharClass::kSpace;
    if (std::isalnum(lead) || lead == '_') return CharClass::kWord;
    return CharClass::kPunct;
  }
  // U+00A0 no-break space.
  if (len == 2 && lead == 0xC2 && static_cast<unsigned char>(text[pos + 1]) == 0xA0) {
    return CharClass::kSpace;
  }
  // U+2000..U+206F general punctuation (dashes, curly quotes, ellipsis, spaces).
  if (len == 3 && lead == 0xE2) {
    const auto second = static_cast<unsigned char>(text[pos + 1]);
    if (second == 0x80 || second == 0x81) {
      const auto third = static_cast<unsigned char>(text[pos + 2]);
      if (second == 0x80 && third <= 0x8A) return CharClass::kSpace;
      return CharClass::kPunct;
    }
  }
  return CharClass::kWord;
}

}  // namespace

std::vector<TokenSpan> WordPunctTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t pos = 0;
  bool in_word = false;
  std::size_t word_start = 0;
  while (pos < text.size()) {
    std::size_t len = utf8_length(static_cast<unsigned char>(text[pos]));
    if (pos + len > text.size()) len = 1;
    const CharClass cls = classify(text, pos, len);
    if (cls == CharClass::kWord) {
      if (!in_word) {
        in_word = true;
        word_start = pos;
      }
    } else {
      if (in_word) {
        out.push_back({word_start, pos});
        in_word = false;
      }
      if (cls == CharClass::kPunct) out.push_back({pos, pos + len});
    }
    pos += len;
  }
  if (in_word) out.push_back({word_start, text.size()});
  return out;
}

std::vector<std::string> Tokenizer::tokens(std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& s : spans(text)) out.emplace_back(text.substr(s.start, s.end - s.start));
  return out;
}

std::pair<std::string, bool> Tokenizer::truncate(std::string_view text,
                                                 std::size_t max_tokens) const {
  const auto sp = spans(text);
  if (sp.size() <= max_tokens) return {std::string(text), false};
  if (max_tokens == 0) return {std::string(), true};
  return {std::string(text.substr(0, sp[max_tokens - 1].end)), true};
}

std::shared_ptr<const Tokenizer> default_tokenizer() {
  static const auto instance = std::make_shared<const WordPunctTokenizer>();
  return instance;
}

}  // namespace dtcrs
