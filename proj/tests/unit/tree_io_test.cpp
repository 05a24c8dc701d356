#include "dtcrs/tree_io.hpp"

#include <gtest/gtest.h>

#include "dtcrs/error.hpp"
#include "dtcrs/random.hpp"
#include "fixtures.hpp"

namespace dtcrs {
namespace {

using nlohmann::json;

SummaryNode node(const std::string& id, int layer, std::vector<std::string> children, Rng& rng) {
  SummaryNode n;
  n.id = id;
  n.layer = layer;
  n.text = "text of " + id;
  n.token_count = 3;
  for (int i = 0; i < 4; ++i) n.embedding.values.push_back(normal01(rng) / 3.0);
  n.children = std::move(children);
  return n;
}

SummaryTree seven_node_tree() {
  Rng rng(9);
  BuildStats stats;
  stats.llm_summary_calls = 3;
  stats.clustering_seconds = 0.25;
  stats.summarization_seconds = 0.5;
  stats.total_seconds = 1.0 / 3.0;
  stats.clustering_mode = "seeded-global";
  stats.layer_records = {{1, 4, 2, true, false}, {2, 2, 1, false, true}};
  stats.warnings = {"example warning"};
  return SummaryTree("doc", "q1",
                     {node("c0", 0, {}, rng), node("c1", 0, {}, rng), node("c2", 0, {}, rng), node("c3", 0, {}, rng),
                      node("s1-0", 1, {"c0", "c1"}, rng), node("s1-1", 1, {"c1", "c2", "c3"}, rng),
                      node("s2-0", 2, {"s1-0", "s1-1"}, rng)},
                     stats);
}

TEST(TreeIo, RoundTripFixture) {
  const SummaryTree t = seven_node_tree();
  const SummaryTree back = deserialize_tree(serialize_tree(t));
  EXPECT_TRUE(back == t);
  EXPECT_EQ(back.nodes()[2].embedding.values, t.nodes()[2].embedding.values);
  EXPECT_EQ(back.stats().total_seconds, 1.0 / 3.0);
}

TEST(TreeIo, EmptyAndSingleLeaf) {
  const SummaryTree empty("d", std::nullopt, {});
  const std::string s = serialize_tree(empty);
  EXPECT_TRUE(json::parse(s).at("nodes").empty());
  EXPECT_TRUE(deserialize_tree(s) == empty);
  Rng rng(1);
  const SummaryTree one("d", std::nullopt, {node("c0", 0, {}, rng)});
  const SummaryTree back = deserialize_tree(serialize_tree(one));
  EXPECT_TRUE(back == one);
  EXPECT_FALSE(back.question_id().has_value());
}

TEST(TreeIo, WithoutTimingsIsStable) {
  SummaryTree a = seven_node_tree();
  SummaryTree b = seven_node_tree();
  b.mutable_stats().total_seconds = 99.0;
  SerializeOptions opt;
  opt.include_timings = false;
  EXPECT_EQ(serialize_tree(a, opt), serialize_tree(b, opt));
  EXPECT_NO_THROW(deserialize_tree(serialize_tree(a, opt)));
}

TEST(TreeIo, RejectsMalformed) {
  EXPECT_THROW(deserialize_tree("{not json"), ParseError);
  json j = json::parse(serialize_tree(seven_node_tree()));
  j.erase("digest");
  json dangling = j;
  dangling["nodes"][4]["children"][0] = "missing";
  EXPECT_THROW(deserialize_tree(dangling.dump()), SchemaError);
  json flat = j;
  // Top node's children moved to its own layer.
  flat["nodes"][6]["children"] = json::array({"s2-x"});
  flat["nodes"].push_back(flat["nodes"][6]);
  flat["nodes"][7]["id"] = "s2-x";
  flat["nodes"][7]["children"] = json::array({"s2-0"});
  EXPECT_THROW(deserialize_tree(flat.dump()), SchemaError);
}

TEST(TreeIo, DigestCatchesTextEdits) {
  json j = json::parse(serialize_tree(seven_node_tree()));
  j["nodes"][0]["text"] = "edited";
  EXPECT_THROW(deserialize_tree(j.dump()), SchemaError);
}

// Collects JSON pointers to every scalar, array and object member.
void collect(const json& j, const json::json_pointer& at, std::vector<json::json_pointer>& out) {
  out.push_back(at);
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) collect(v, at / k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) collect(j[i], at / i, out);
  }
}

TEST(TreeIo, SingleFieldFuzzNeverYieldsDifferentTree) {
  const SummaryTree original = seven_node_tree();
  const json base = json::parse(serialize_tree(original));
  std::vector<json::json_pointer> paths;
  collect(base, json::json_pointer(), paths);
  Rng rng(2024);
  int rejected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    json m = base;
    const auto& p = paths[1 + uniform_index(rng, paths.size() - 1)];
    json& v = m[p];
    switch (uniform_index(rng, 4)) {
      case 0: v = nullptr; break;
      case 1: v = v.is_number() ? json(v.get<double>() + 1.0) : json(42); break;
      case 2: v = v.is_string() ? json(v.get<std::string>() + "x") : json("x"); break;
      default: {
        const json::json_pointer parent = p.parent_pointer();
        json& container = m[parent];
        if (container.is_object()) {
          container.erase(p.back());
        } else {
          container.erase(static_cast<std::size_t>(std::stoul(p.back())));
        }
      }
    }
    try {
      const SummaryTree t = deserialize_tree(m.dump());
      EXPECT_TRUE(t == original) << "mutation at " << p.to_string() << " produced a different tree";
    } catch (const ParseError&) {
      ++rejected;
    } catch (const SchemaError&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 80);
}

TEST(TreeIo, FileHelpers) {
  testing::TempDir dir;
  write_file(dir.file("a.txt"), "hello");
  EXPECT_EQ(read_file(dir.file("a.txt")), "hello");
  EXPECT_THROW(read_file(dir.file("missing")), DataError);
  EXPECT_NE(fnv1a64("a"), fnv1a64("b"));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
}

}  // namespace
}  // namespace dtcrs
