#include "dtcrs/tokenizer.hpp"

#include <gtest/gtest.h>

namespace dtcrs {
namespace {

TEST(Tokenizer, WordsAndPunctuation) {
  const auto& tok = *default_tokenizer();
  EXPECT_EQ(tok.tokens("Hello, world! It's 3.5km."),
            (std::vector<std::string>{"Hello", ",", "world", "!", "It", "'", "s", "3", ".", "5km", "."}));
  EXPECT_EQ(tok.count(""), 0u);
  EXPECT_EQ(tok.count("   \n\t "), 0u);
  EXPECT_EQ(tok.count("snake_case"), 1u);
}

TEST(Tokenizer, Utf8) {
  const auto& tok = *default_tokenizer();
  EXPECT_EQ(tok.tokens("café naïve"), (std::vector<std::string>{"café", "naïve"}));
  // Em dash is punctuation, no-break space separates.
  EXPECT_EQ(tok.tokens("a—b c"), (std::vector<std::string>{"a", "—", "b", "c"}));
  // A truncated multi-byte sequence still yields a token instead of reading past the end.
  EXPECT_EQ(tok.count(std::string("x\xE2")), 1u);
}

TEST(Tokenizer, SpansAreByteOffsets) {
  const auto sp = default_tokenizer()->spans("ab  c.");
  ASSERT_EQ(sp.size(), 3u);
  EXPECT_EQ(sp[0].start, 0u);
  EXPECT_EQ(sp[0].end, 2u);
  EXPECT_EQ(sp[1].start, 4u);
  EXPECT_EQ(sp[2].start, 5u);
}

TEST(Tokenizer, Truncate) {
  const auto& tok = *default_tokenizer();
  EXPECT_EQ(tok.truncate("one two three", 2), (std::pair<std::string, bool>{"one two", true}));
  EXPECT_EQ(tok.truncate("one two", 2), (std::pair<std::string, bool>{"one two", false}));
  EXPECT_EQ(tok.truncate("one", 0), (std::pair<std::string, bool>{"", true}));
  EXPECT_LE(tok.count(tok.truncate("a, b, c, d", 3).first), 3u);
}

}  // namespace
}  // namespace dtcrs
