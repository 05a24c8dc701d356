#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "dtcrs/error.hpp"
#include "dtcrs/llm.hpp"
#include "fixtures.hpp"

namespace dtcrs {
namespace {

TEST(ParseToc, NumberedAndNested) {
  const auto toc = parse::toc("1. Intro\n2. Methods\n2.1 Data\n");
  ASSERT_EQ(toc.entries.size(), 3u);
  EXPECT_EQ(toc.entries[0].heading, "Intro");
  EXPECT_EQ(toc.entries[0].level, 1);
  EXPECT_EQ(toc.entries[1].level, 1);
  EXPECT_EQ(toc.entries[2].heading, "Data");
  EXPECT_EQ(toc.entries[2].level, 2);
  EXPECT_FALSE(toc.degraded);
}

TEST(ParseToc, MarkdownBulletsRoman) {
  const auto toc = parse::toc("# Top\n## Sub\n- item\n  - deeper\nII. Second\nnoise line");
  ASSERT_EQ(toc.entries.size(), 5u);
  EXPECT_EQ(toc.entries[1].level, 2);
  EXPECT_EQ(toc.entries[2].heading, "item");
  EXPECT_EQ(toc.entries[3].level, 2);
  EXPECT_EQ(toc.entries[4].heading, "Second");
}

TEST(ParseToc, UnparseableDegrades) {
  auto toc = parse::toc("");
  EXPECT_TRUE(toc.degraded);
  ASSERT_EQ(toc.entries.size(), 1u);
  toc = parse::toc("just prose without structure");
  EXPECT_TRUE(toc.degraded);
  EXPECT_EQ(toc.entries[0].heading, "just prose without structure");
}

TEST(ParseBinaryLabel, Table) {
  EXPECT_EQ(parse::binary_label("1"), 1);
  EXPECT_EQ(parse::binary_label("Label: 0"), 0);
  EXPECT_EQ(parse::binary_label("Yes."), 1);
  EXPECT_EQ(parse::binary_label("no"), 0);
  EXPECT_EQ(parse::binary_label("This is complex"), 1);
  EXPECT_FALSE(parse::binary_label("maybe later").has_value());
  EXPECT_FALSE(parse::binary_label("").has_value());
}

TEST(ParseSubQuestions, Markers) {
  EXPECT_EQ(parse::sub_questions("1. A?\n\n2. B?\n3. C?"), (std::vector<std::string>{"A?", "B?", "C?"}));
  EXPECT_EQ(parse::sub_questions("Sub-questions:\n- A?\n* B?\nQ3: C?\n(4) D?"),
            (std::vector<std::string>{"A?", "B?", "C?", "D?"}));
  EXPECT_TRUE(parse::sub_questions("  \n\n").empty());
}

TEST(ParseFreeform, StripsLabelAndQuotes) {
  EXPECT_EQ(parse::freeform_answer("Answer: yes"), "yes");
  EXPECT_EQ(parse::freeform_answer("  final answer - \"forty two\" "), "forty two");
  EXPECT_EQ(parse::freeform_answer("plain"), "plain");
}

TEST(ParseChoice, Forms) {
  const std::vector<std::string> opts = {"red", "green", "blue", "yellow"};
  EXPECT_EQ(parse::choice("B", opts), 1u);
  EXPECT_EQ(parse::choice("Answer: (C)", opts), 2u);
  EXPECT_EQ(parse::choice("I think D", opts), 3u);
  EXPECT_EQ(parse::choice("4", opts), 3u);
  EXPECT_EQ(parse::choice("it is green", opts), 1u);
  EXPECT_EQ(parse::choice("a", opts), 0u);
  EXPECT_FALSE(parse::choice("E", opts).has_value());
  EXPECT_FALSE(parse::choice("9", opts).has_value());
  EXPECT_FALSE(parse::choice("none", opts).has_value());
}

TEST(PromptTemplates, RenderKeepsUnknownPlaceholders) {
  const auto t = PromptTemplates::builtin();
  for (const char* name : {"toc", "classify", "decompose", "decompose_no_toc", "summarize",
                           "answer_freeform", "answer_choice"}) {
    EXPECT_FALSE(t.get(name).empty()) << name;
  }
  EXPECT_THROW(t.get("nope"), ArgumentError);
  const std::string out = t.render("classify", {{"question", "QQQ"}, {"toc", "TTT"}});
  EXPECT_NE(out.find("QQQ"), std::string::npos);
  EXPECT_NE(out.find("TTT"), std::string::npos);
  EXPECT_EQ(out.find("{question}"), std::string::npos);
}

TEST(PromptTemplates, DirectoryOverride) {
  testing::TempDir dir;
  std::ofstream(dir.file("classify.txt")) << "Q={question}";
  const auto t = PromptTemplates::from_directory(dir.path().string());
  EXPECT_EQ(t.render("classify", {{"question", "x"}}), "Q=x");
  EXPECT_EQ(t.get("toc"), PromptTemplates::builtin().get("toc"));
  EXPECT_THROW(PromptTemplates::from_directory(dir.file("missing")), ArgumentError);
}

struct GatewayFixture : ::testing::Test {
  std::shared_ptr<MockLlmProvider> mock = std::make_shared<MockLlmProvider>();
  PipelineConfig config;
  LlmGateway gateway() { return LlmGateway(mock, config); }
};

TEST_F(GatewayFixture, ClassifyFallsBackToDpr) {
  mock->script_step(LlmStep::kClassify, "unsure");
  auto g = gateway();
  const auto r = g.classify_question("What is X?", {});
  EXPECT_EQ(r.label, 0);
  ASSERT_TRUE(r.warning.has_value());
  mock->script_step(LlmStep::kClassify, "1");
  EXPECT_EQ(g.classify_question("What is X?", {}).label, 1);
  EXPECT_FALSE(g.classify_question("What is X?", {}).warning.has_value());
  EXPECT_THROW(g.classify_question("  ", {}), ArgumentError);
}

TEST_F(GatewayFixture, DecomposeFallsBackToQuestion) {
  auto g = gateway();
  mock->script_step(LlmStep::kDecompose, "1. A?\n2. B?\n3. C?");
  auto set = g.decompose_question("q1", "Original?", {});
  EXPECT_EQ(set.count(), 3u);
  EXPECT_FALSE(set.fallback);
  EXPECT_EQ(set.question_id, "q1");
  mock->script_step(LlmStep::kDecompose, "");
  set = g.decompose_question("q1", "Original?", {});
  EXPECT_EQ(set.sub_questions, std::vector<std::string>{"Original?"});
  EXPECT_TRUE(set.fallback);
}

TEST_F(GatewayFixture, DecomposeWithoutTocOmitsOutline) {
  auto g = gateway();
  TableOfContents toc = parse::toc("1. UNIQUEHEADING");
  g.decompose_question("q", "Why?", toc, false);
  g.decompose_question("q", "Why?", toc, true);
  const auto log = mock->transcript();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_NE(log[0].prompt_digest, log[1].prompt_digest);
}

TEST_F(GatewayFixture, SummaryTruncatedToLimit) {
  std::string long_reply;
  for (int i = 0; i < 120; ++i) long_reply += "word" + std::to_string(i) + " ";
  mock->script_step(LlmStep::kSummarize, long_reply);
  auto g = gateway();
  const auto s = g.summarize_cluster({"a", "b"}, 100);
  EXPECT_TRUE(s.truncated);
  EXPECT_LE(s.token_count, 100u);
  EXPECT_EQ(s.token_count, g.tokenizer().count(s.text));
  EXPECT_THROW(g.summarize_cluster({}, 100), ArgumentError);
  EXPECT_THROW(g.summarize_cluster({"a"}, 0), ArgumentError);
  mock->script_step(LlmStep::kSummarize, "short");
  EXPECT_FALSE(g.summarize_cluster({"a"}, 100).truncated);
}

TEST_F(GatewayFixture, ChoiceFallback) {
  auto g = gateway();
  const std::vector<std::string> opts = {"w", "x", "y", "z"};
  mock->script_step(LlmStep::kAnswerChoice, "B");
  auto r = g.answer("Q?", {"ctx"}, opts);
  EXPECT_EQ(r.choice, 1u);
  EXPECT_FALSE(r.warning.has_value());
  mock->script_step(LlmStep::kAnswerChoice, "E");
  r = g.answer("Q?", {"ctx"}, opts);
  EXPECT_EQ(r.choice, 0u);
  EXPECT_TRUE(r.warning.has_value());
}

TEST_F(GatewayFixture, FreeformAnswerParsed) {
  mock->script_step(LlmStep::kAnswerFreeform, "Answer: yes");
  auto g = gateway();
  const auto r = g.answer("Q?", {"one", "two"});
  EXPECT_EQ(r.text, "yes");
  EXPECT_FALSE(r.choice.has_value());
  EXPECT_EQ(r.context_items_used, 2u);
}

TEST_F(GatewayFixture, ContextPackedBestFirstWithinWindow) {
  config.providers.context_tokens = 400;
  auto g = gateway();
  std::string big;
  for (int i = 0; i < 2000; ++i) big += "tok ";
  const auto r = g.answer("Q?", {"small first", big, "small last"});
  // The oversized item stops packing; later items are not considered.
  EXPECT_EQ(r.context_items_used, 1u);
}

TEST_F(GatewayFixture, TemperatureRouting) {
  config.temperatures[LlmStep::kClassify] = 0.7;
  auto g = gateway();
  g.classify_question("Q?", {});
  g.summarize_cluster({"text"}, 10);
  g.answer("Q?", {"c"});
  const auto log = mock->transcript();
  ASSERT_EQ(log.size(), 3u);
  EXPECT_DOUBLE_EQ(log[0].temperature, 0.7);
  EXPECT_DOUBLE_EQ(log[1].temperature, default_temperature(LlmStep::kSummarize));
  EXPECT_EQ(log[1].max_tokens, 10u);
  EXPECT_DOUBLE_EQ(log[2].temperature, 0.0);
}

TEST_F(GatewayFixture, TocTruncatesLongDocuments) {
  config.providers.context_tokens = 300;
  auto g = gateway();
  const auto doc = testing::topic_document("d", 3, 40, 1);
  const auto toc = g.generate_toc(doc);
  EXPECT_TRUE(toc.truncated);
  EXPECT_FALSE(toc.entries.empty());
  config.providers.context_tokens = 1000000;
  auto g2 = gateway();
  EXPECT_FALSE(g2.generate_toc(doc).truncated);
  EXPECT_THROW(g2.generate_toc(Document{}), ArgumentError);
}

TEST_F(GatewayFixture, TransportErrorsPropagate) {
  mock->fail_step(LlmStep::kClassify);
  auto g = gateway();
  EXPECT_THROW(g.classify_question("Q?", {}), TransportError);
  EXPECT_EQ(mock->call_count(LlmStep::kClassify), 1u);
}

class SlowProvider final : public LlmProvider {
 public:
  std::string complete(const LlmRequest&) override {
    const int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --active;
    return "ok";
  }
  std::string name() const override { return "slow"; }
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
};

TEST(LlmGateway, BoundsInFlightRequests) {
  auto slow = std::make_shared<SlowProvider>();
  PipelineConfig config;
  config.providers.max_in_flight = 2;
  LlmGateway g(slow, config);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { g.summarize_cluster({"x"}, 5); });
  for (auto& t : threads) t.join();
  EXPECT_LE(slow->peak.load(), 2);
  EXPECT_GE(slow->peak.load(), 1);
}

TEST(MockLlmProvider, DeterministicAndScripted) {
  MockLlmProvider a;
  MockLlmProvider b;
  LlmRequest req;
  req.step = LlmStep::kClassify;
  req.prompt = "p";
  req.fields = {{"question", "Why does the reef bleach?"}};
  EXPECT_EQ(a.complete(req), b.complete(req));
  EXPECT_EQ(a.complete(req), "1");
  a.script(LlmStep::kClassify, "p", "0");
  EXPECT_EQ(a.complete(req), "0");
  req.prompt = "other";
  EXPECT_EQ(a.complete(req), "1");
  const auto log = a.transcript();
  EXPECT_EQ(log.back().source, "fallback");
  EXPECT_EQ(log[log.size() - 2].source, "script");
  EXPECT_EQ(a.call_count(), 4u);
  a.clear_transcript();
  EXPECT_EQ(a.call_count(), 0u);
}

TEST(LlmFactory, PicksProviderAndEndpoint) {
  ProviderSettings s;
  s.llm = "mock";
  EXPECT_EQ(make_llm_provider(s)->name(), "mock");
  EXPECT_EQ(HttpLlmProvider("http://h:1/", "m", "", 1, 0).endpoint(), "http://h:1/v1/chat/completions");
  EXPECT_EQ(HttpLlmProvider("http://h:1/x/chat/completions", "m", "", 1, 0).endpoint(),
            "http://h:1/x/chat/completions");
}

}  // namespace
}  // namespace dtcrs
