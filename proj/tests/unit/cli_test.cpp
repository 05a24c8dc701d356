#include "cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dtcrs/llm.hpp"
#include "dtcrs/tree_io.hpp"
#include "fixtures.hpp"

namespace dtcrs {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    doc_ = dir_.file("doc.txt");
    std::ofstream(doc_) << testing::topic_document("doc", 5, 150, 4).text;
  }

  std::string qasper() const { return std::string(DTCRS_SOURCE_DIR) + "/tests/data/qasper_fixture.json"; }

  testing::TempDir dir_;
  std::string doc_;
};

TEST_F(CliTest, BuildTreeIsByteIdenticalAcrossRunsAndJobs) {
  const std::vector<std::string> base{"build-tree", "--mock",   "--seed", "7", "--doc", doc_,
                                      "--question", "Summarize the topics", "--reduction", "linear"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  ASSERT_EQ(cli(with({"--out", dir_.file("a.json")})).code, 0);
  ASSERT_EQ(cli(with({"--out", dir_.file("b.json")})).code, 0);
  const CliRun c = cli(with({"--out", dir_.file("c.json"), "--jobs", "4"}));
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("layer  nodes"), std::string::npos);
  const std::string a = read_file(dir_.file("a.json"));
  EXPECT_EQ(a, read_file(dir_.file("b.json")));
  EXPECT_EQ(a, read_file(dir_.file("c.json")));
  EXPECT_GE(deserialize_tree(a).layers().size(), 2u);
}

TEST_F(CliTest, StaticTreeAndStats) {
  ASSERT_EQ(cli({"build-tree", "--mock", "--static", "--hierarchical", "--doc", doc_, "--out", dir_.file("s.json")}).code, 0);
  const CliRun s = cli({"stats", dir_.file("s.json")});
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("hierarchical"), std::string::npos);
  const CliRun j = cli({"stats", "--json", dir_.file("s.json")});
  ASSERT_EQ(j.code, 0);
  EXPECT_EQ(nlohmann::json::parse(j.out).at("tree_count"), 1);
}

TEST_F(CliTest, ErrorExitCodes) {
  EXPECT_EQ(cli({"build-tree", "--mock", "--doc", dir_.file("missing.txt"), "--question", "x"}).code, 1);
  EXPECT_EQ(cli({"bogus"}).code, 1);
  EXPECT_EQ(cli({}).code, 1);
  std::ofstream(dir_.file("bad.json")) << R"({"chunk_size_limit": 0})";
  EXPECT_EQ(cli({"toc", "--mock", "--config", dir_.file("bad.json"), "--doc", doc_}).code, 1);
  std::ofstream(dir_.file("unknown.json")) << R"({"nonsense": 1})";
  EXPECT_EQ(cli({"toc", "--mock", "--config", dir_.file("unknown.json"), "--doc", doc_}).code, 1);
  std::ofstream(dir_.file("corrupt_tree.json")) << R"({"doc_id": 1})";
  EXPECT_EQ(cli({"stats", dir_.file("corrupt_tree.json")}).code, 3);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, TransportFailureExitsTwo) {
  std::ofstream(dir_.file("net.json"))
      << R"({"providers": {"llm": "http", "embedding": "test", "base_url": "http://127.0.0.1:9",
            "max_retries": 0, "timeout_seconds": 2}})";
  const CliRun r = cli({"toc", "--config", dir_.file("net.json"), "--doc", doc_});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST_F(CliTest, QueryMethods) {
  const CliRun dpr = cli({"query", "--mock", "--doc", doc_, "--question", "what words", "--method", "dpr", "--k", "3"});
  ASSERT_EQ(dpr.code, 0) << dpr.err;
  const auto d = nlohmann::json::parse(dpr.out);
  EXPECT_EQ(d.at("route"), "dpr");
  EXPECT_EQ(d.at("retrieval").at("items").size(), 3u);

  ASSERT_EQ(cli({"build-tree", "--mock", "--doc", doc_, "--question", "Summarize", "--out", dir_.file("t.json")}).code, 0);
  const CliRun col = cli({"query", "--mock", "--tree", dir_.file("t.json"), "--question", "Summarize", "--method", "collapsed"});
  ASSERT_EQ(col.code, 0) << col.err;
  EXPECT_EQ(nlohmann::json::parse(col.out).at("route"), "tree");

  const CliRun zero = cli({"query", "--mock", "--tree", dir_.file("t.json"), "--question", "Summarize", "--method",
                        "collapsed", "--budget", "0"});
  ASSERT_EQ(zero.code, 0);
  const auto z = nlohmann::json::parse(zero.out);
  EXPECT_TRUE(z.at("retrieval").at("items").empty());
  EXPECT_FALSE(z.at("answer").get<std::string>().empty());

  const CliRun tr = cli({"query", "--mock", "--doc", doc_, "--question", "Summarize", "--method", "traversal", "--k", "2"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(nlohmann::json::parse(tr.out).at("retrieval").at("method"), "traversal");

  const CliRun autorun = cli({"query", "--mock", "--doc", doc_, "--question", "Summarize the document"});
  ASSERT_EQ(autorun.code, 0);
  EXPECT_EQ(nlohmann::json::parse(autorun.out).at("route"), "tree");
  EXPECT_EQ(cli({"query", "--mock", "--doc", doc_, "--tree", dir_.file("t.json"), "--question", "x"}).code, 1);
}

TEST_F(CliTest, EvaluateWritesReports) {
  const std::size_t before = network_request_count();
  const CliRun r = cli({"evaluate", "--mock", "--dataset", "qasper", "--data", qasper(), "--limit", "3", "--out-dir",
                     dir_.file("ev")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(network_request_count(), before);
  const auto report = nlohmann::json::parse(read_file(dir_.file("ev/report.json")));
  EXPECT_EQ(report.at("per_question").size(), 3u);
  EXPECT_NE(read_file(dir_.file("ev/report.csv")).find("question_id,type,f1"), std::string::npos);
  EXPECT_NO_THROW(nlohmann::json::parse(read_file(dir_.file("ev/tree_stats.json"))));
}

TEST_F(CliTest, EvaluateVariants) {
  const CliRun g = cli({"evaluate", "--mock", "--dataset", "qasper", "--data", qasper(), "--variant", "no_global",
                     "--out-dir", dir_.file("g")});
  ASSERT_EQ(g.code, 0) << g.err;
  std::istringstream lines(read_file(dir_.file("g/answers.jsonl")));
  std::string line;
  int trees = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.contains("clustering_mode")) {
      ++trees;
      EXPECT_EQ(j.at("clustering_mode"), "hierarchical");
    }
  }
  EXPECT_GT(trees, 0);
  EXPECT_EQ(cli({"evaluate", "--mock", "--dataset", "qasper", "--data", qasper(), "--variant", "nope"}).code, 1);
  EXPECT_EQ(cli({"evaluate", "--mock", "--dataset", "qasper", "--data", qasper(), "--variant", "no_toc",
                 "--no-classify"}).code,
            1);
  EXPECT_EQ(cli({"evaluate", "--mock", "--dataset", "squad", "--data", qasper()}).code, 1);
}

}  // namespace
}  // namespace dtcrs
