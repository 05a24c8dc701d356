#include "dtcrs/pipeline.hpp"

#include <gtest/gtest.h>

#include <mutex>

#include "dtcrs/error.hpp"
#include "dtcrs/tree_io.hpp"
#include "fixtures.hpp"

namespace dtcrs {
namespace {

/// Mock provider that also keeps every request.
class RecordingProvider final : public LlmProvider {
 public:
  std::string complete(const LlmRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      requests.push_back(request);
    }
    return mock.complete(request);
  }
  std::string name() const override { return "recording"; }
  std::size_t count(LlmStep step) const {
    std::size_t n = 0;
    for (const auto& r : requests) n += r.step == step;
    return n;
  }

  MockLlmProvider mock;
  std::vector<LlmRequest> requests;

 private:
  std::mutex mutex_;
};

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.chunk_size_limit = 60;
  cfg.collapsed_budget_tokens = 400;
  cfg.rng_seed = 11;
  return cfg;
}

QuestionRecord question(const std::string& id, const std::string& text) {
  QuestionRecord q;
  q.id = id;
  q.doc_id = "doc";
  q.text = text;
  q.gold_answers = {"x"};
  return q;
}

struct Harness {
  explicit Harness(PipelineConfig cfg = small_config())
      : llm(std::make_shared<RecordingProvider>()),
        pipeline(cfg, llm, std::make_shared<HashProjectionEmbedder>(16, 5)),
        prepared(pipeline.prepare(testing::topic_document("doc", 4, 12, 3))) {}

  std::shared_ptr<RecordingProvider> llm;
  Pipeline pipeline;
  PreparedDocument prepared;
};

TEST(Pipeline, PreparesChunksAndEmbeddings) {
  Harness h;
  EXPECT_GT(h.prepared.chunks.size(), 8u);
  EXPECT_EQ(h.prepared.embeddings.size(), h.prepared.chunks.size());
  Document empty{"e", "", ""};
  EXPECT_THROW(h.pipeline.prepare(empty), DataError);
}

TEST(Pipeline, LabelZeroRoutesToDpr) {
  Harness h;
  h.llm->mock.script_step(LlmStep::kClassify, "0");
  const AnswerRecord r = h.pipeline.answer_question(question("q1", "What is the name?"), h.prepared);
  ASSERT_TRUE(r.ok()) << *r.error;
  EXPECT_EQ(r.route, Route::kDpr);
  EXPECT_EQ(r.label, 0);
  EXPECT_FALSE(r.tree_ref.has_value());
  EXPECT_FALSE(r.tree.has_value());
  EXPECT_EQ(r.retrieval.method, RetrievalMethod::kDpr);
  EXPECT_EQ(r.retrieval.items.size(), 5u);
  EXPECT_EQ(h.llm->count(LlmStep::kSummarize), 0u);
  EXPECT_EQ(h.llm->count(LlmStep::kDecompose), 0u);
  EXPECT_EQ(h.llm->count(LlmStep::kToc), 1u);
  EXPECT_FALSE(r.answer.empty());
}

TEST(Pipeline, LabelOneBuildsTree) {
  Harness h;
  h.llm->mock.script_step(LlmStep::kClassify, "1");
  const AnswerRecord r = h.pipeline.answer_question(question("q2", "Summarize the document."), h.prepared);
  ASSERT_TRUE(r.ok()) << *r.error;
  EXPECT_EQ(r.route, Route::kTree);
  EXPECT_EQ(r.tree_ref, "doc/q2");
  ASSERT_TRUE(r.tree.has_value());
  EXPECT_EQ(r.tree->question_id(), "q2");
  EXPECT_EQ(r.retrieval.method, RetrievalMethod::kCollapsed);
  EXPECT_LE(r.retrieval.total_tokens, 400u);
  EXPECT_GT(h.llm->count(LlmStep::kSummarize), 0u);
  EXPECT_EQ(h.llm->count(LlmStep::kToc), 1u);
  EXPECT_FALSE(r.sub_questions.empty());
  for (const char* phase : {"toc", "classify", "decompose", "build", "retrieve", "answer", "total"}) {
    EXPECT_TRUE(r.timings.count(phase)) << phase;
  }
}

TEST(Pipeline, NoClassifyAlwaysBuildsTree) {
  PipelineConfig cfg = small_config();
  cfg.no_classify = true;
  Harness h(cfg);
  h.llm->mock.script_step(LlmStep::kClassify, "0");
  const AnswerRecord r = h.pipeline.answer_question(question("q3", "What is the name?"), h.prepared);
  EXPECT_EQ(r.route, Route::kTree);
  EXPECT_FALSE(r.label.has_value());
  EXPECT_EQ(h.llm->count(LlmStep::kClassify), 0u);
  EXPECT_EQ(h.llm->count(LlmStep::kToc), 1u);
}

TEST(Pipeline, NoTocLeavesContentsOutOfDecomposition) {
  PipelineConfig cfg = small_config();
  cfg.no_toc = true;
  Harness h(cfg);
  h.llm->mock.script_step(LlmStep::kClassify, "1");
  h.llm->mock.script_step(LlmStep::kToc, "1. UNIQUE-HEADING-MARKER");
  h.pipeline.answer_question(question("q4", "Explain the topics."), h.prepared);
  EXPECT_EQ(h.llm->count(LlmStep::kToc), 1u);  // still needed by the classifier
  bool saw_decompose = false;
  for (const auto& req : h.llm->requests) {
    if (req.step != LlmStep::kDecompose) continue;
    saw_decompose = true;
    EXPECT_EQ(req.prompt.find("UNIQUE-HEADING-MARKER"), std::string::npos);
  }
  EXPECT_TRUE(saw_decompose);

  cfg.no_classify = true;
  Harness h2(cfg);
  h2.pipeline.answer_question(question("q5", "Explain the topics."), h2.prepared);
  EXPECT_EQ(h2.llm->count(LlmStep::kToc), 0u);
}

TEST(Pipeline, TransportFailureBecomesErrorRecord) {
  Harness h;
  h.llm->mock.script_step(LlmStep::kClassify, "1");
  h.llm->mock.fail_step(LlmStep::kSummarize);
  const AnswerRecord r = h.pipeline.answer_question(question("q6", "Summarize."), h.prepared);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.error_phase, "build");
  ASSERT_TRUE(r.tree.has_value());
  EXPECT_EQ(r.tree->layers().size(), 1u);

  h.llm->mock.fail_step(LlmStep::kClassify);
  const AnswerRecord c = h.pipeline.answer_question(question("q7", "Summarize."), h.prepared);
  EXPECT_EQ(c.error_phase, "classify");
}

TEST(Pipeline, DeterministicPerQuestion) {
  Harness a;
  Harness b;
  a.llm->mock.script_step(LlmStep::kClassify, "1");
  b.llm->mock.script_step(LlmStep::kClassify, "1");
  b.pipeline.answer_question(question("other", "Compare things."), b.prepared);
  const AnswerRecord ra = a.pipeline.answer_question(question("q8", "Summarize."), a.prepared);
  const AnswerRecord rb = b.pipeline.answer_question(question("q8", "Summarize."), b.prepared);
  EXPECT_EQ(to_json(ra, false), to_json(rb, false));
  SerializeOptions opt;
  opt.include_timings = false;
  EXPECT_EQ(serialize_tree(*ra.tree, opt), serialize_tree(*rb.tree, opt));
}

Dataset qasper() {
  return load_dataset(DatasetKind::kQasper, std::string(DTCRS_SOURCE_DIR) + "/tests/data/qasper_fixture.json");
}

TEST(Ablation, NoClassifyBuildsEveryTree) {
  const Dataset ds = qasper();
  PipelineConfig cfg = small_config();
  cfg.chunk_size_limit = 20;
  auto embed = std::make_shared<HashProjectionEmbedder>(16, 5);
  auto full_llm = std::make_shared<MockLlmProvider>();
  auto nc_llm = std::make_shared<MockLlmProvider>();
  const EvaluationRun full = run_ablation(AblationVariant::kFull, ds, cfg, full_llm, embed);
  const EvaluationRun nc = run_ablation(AblationVariant::kNoClassify, ds, cfg, nc_llm, embed);
  ASSERT_EQ(full.records.size(), 12u);
  std::size_t full_trees = 0;
  for (const auto& r : full.records) full_trees += r.route == Route::kTree;
  EXPECT_LT(full_trees, 12u);
  for (const auto& r : nc.records) EXPECT_EQ(r.route, Route::kTree);
  EXPECT_GT(nc_llm->call_count(), full_llm->call_count());
  EXPECT_EQ(nc.report.variant, "no_classify");
  EXPECT_EQ(nc.report.per_question.size(), 12u);
  EXPECT_EQ(nc.report.per_type.size(), 4u);
  EXPECT_EQ(nc.tree_stats.tree_count, 12u);
}

TEST(Ablation, NoGlobalUsesHierarchicalClustering) {
  const Dataset ds = qasper();
  PipelineConfig cfg = small_config();
  cfg.chunk_size_limit = 20;
  const EvaluationRun run = run_ablation(AblationVariant::kNoGlobal, ds, cfg, std::make_shared<MockLlmProvider>(),
                                         std::make_shared<HashProjectionEmbedder>(16, 5));
  bool any = false;
  for (const auto& r : run.records) {
    if (!r.tree) continue;
    any = true;
    EXPECT_EQ(r.tree->stats().clustering_mode, "hierarchical");
  }
  EXPECT_TRUE(any);
}

TEST(Ablation, ResultsIndependentOfJobs) {
  const Dataset ds = qasper();
  PipelineConfig cfg = small_config();
  cfg.chunk_size_limit = 20;
  auto embed = std::make_shared<HashProjectionEmbedder>(16, 5);
  const EvaluationRun one = run_ablation(AblationVariant::kFull, ds, cfg, std::make_shared<MockLlmProvider>(), embed);
  cfg.jobs = 4;
  const EvaluationRun four = run_ablation(AblationVariant::kFull, ds, cfg, std::make_shared<MockLlmProvider>(), embed);
  ASSERT_EQ(one.records.size(), four.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    EXPECT_EQ(to_json(one.records[i], false), to_json(four.records[i], false));
  }
  EXPECT_EQ(to_json(one.report), to_json(four.report));
}

TEST(Ablation, VariantNames) {
  EXPECT_EQ(ablation_variant_from_string("no_toc"), AblationVariant::kNoToc);
  EXPECT_THROW(ablation_variant_from_string("no_tree"), ArgumentError);
  EXPECT_TRUE(apply_variant({}, AblationVariant::kNoGlobal).hierarchical_clustering);
}

}  // namespace
}  // namespace dtcrs
