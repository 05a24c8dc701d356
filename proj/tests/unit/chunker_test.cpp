#include "dtcrs/chunker.hpp"

#include <gtest/gtest.h>

#include "dtcrs/error.hpp"
#include "dtcrs/random.hpp"
#include "fixtures.hpp"

namespace dtcrs {
namespace {

std::string sentence_of(std::size_t tokens, char letter) {
  // (tokens - 1) words plus the final period.
  std::string s;
  for (std::size_t i = 0; i + 1 < tokens; ++i) s += std::string(i == 0 ? "" : " ") + letter + std::to_string(i);
  return s + ".";
}

std::string collapse_ws(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
    } else {
      if (space && !out.empty()) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

TEST(SplitSentences, Examples) {
  EXPECT_TRUE(split_sentences("").empty());
  EXPECT_EQ(split_sentences("A. B? C!").size(), 3u);
  EXPECT_EQ(split_sentences("Dr. Smith ran.").size(), 1u);
  EXPECT_EQ(split_sentences("Pi is 3.14 roughly. Yes.").size(), 2u);
  EXPECT_EQ(split_sentences("He said \"stop.\" Then left.").size(), 2u);
  EXPECT_EQ(split_sentences("No terminator at the end").size(), 1u);
  EXPECT_EQ(split_sentences("Wait... what?! Fine.").size(), 3u);
}

TEST(SplitSentences, SpansCoverText) {
  const std::string text = "  First one.  Second (e.g. this) one!\nThird?  ";
  const auto spans = split_sentences(text);
  ASSERT_EQ(spans.size(), 3u);
  std::string joined;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i > 0) {
      EXPECT_GE(spans[i].start, spans[i - 1].end);
    }
    joined += text.substr(spans[i].start, spans[i].end - spans[i].start) + " ";
  }
  EXPECT_EQ(collapse_ws(joined), collapse_ws(text));
  EXPECT_EQ(spans[0].token_count, 3u);
}

TEST(Chunker, MovesCrossingSentenceWhole) {
  Document d{"d", "", sentence_of(300, 'a') + " " + sentence_of(250, 'b')};
  const ChunkResult r = chunk_document(d, 500);
  ASSERT_EQ(r.chunks.size(), 2u);
  EXPECT_EQ(r.chunks[0].token_count, 300u);
  EXPECT_EQ(r.chunks[1].token_count, 250u);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Chunker, GreedyPackingOracle) {
  std::string text;
  for (int i = 0; i < 10; ++i) text += sentence_of(100, static_cast<char>('a' + i)) + " ";
  const ChunkResult r = chunk_document({"d", "", text}, 500);
  ASSERT_EQ(r.chunks.size(), 2u);
  EXPECT_EQ(r.chunks[0].token_count, 500u);
  EXPECT_EQ(r.chunks[1].token_count, 500u);
  EXPECT_EQ(r.chunks[1].id, "d:000001");
  EXPECT_EQ(r.chunks[1].index, 1u);
}

TEST(Chunker, EmptyAndOversized) {
  EXPECT_TRUE(chunk_document({"d", "", ""}, 10).chunks.empty());
  const ChunkResult r = chunk_document({"d", "", "Short one. " + sentence_of(30, 'x') + " Tail."}, 10);
  ASSERT_EQ(r.chunks.size(), 3u);
  EXPECT_TRUE(r.chunks[1].oversized);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_THROW(chunk_document({"d", "", "x"}, 0), ArgumentError);
}

TEST(Chunker, CoverageBudgetMaximalityOnRandomDocs) {
  const auto& tok = *default_tokenizer();
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    const std::size_t limit = 20 + uniform_index(rng, 80);
    const Document doc = testing::topic_document("r", 3, 5 + uniform_index(rng, 20), seed, 4 + uniform_index(rng, 12));
    const ChunkResult r = chunk_document(doc, limit);
    const auto sentences = split_sentences(doc.text);
    std::string joined;
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < r.chunks.size(); ++i) {
      const Chunk& c = r.chunks[i];
      EXPECT_EQ(c.token_count, tok.count(c.text));
      if (!c.oversized) {
        EXPECT_LE(c.token_count, limit);
      }
      const std::size_t start = doc.text.find(c.text, prev_end);
      ASSERT_NE(start, std::string::npos);
      prev_end = start + c.text.size();
      joined += c.text + " ";
      if (i + 1 < r.chunks.size()) {
        // The next chunk's first sentence would not have fit.
        const auto next_first = split_sentences(r.chunks[i + 1].text).front();
        EXPECT_GT(c.token_count + next_first.token_count, limit);
      }
    }
    EXPECT_EQ(collapse_ws(joined), collapse_ws(doc.text));
    EXPECT_EQ(chunk_document(doc, limit).chunks, r.chunks);
  }
}

}  // namespace
}  // namespace dtcrs
