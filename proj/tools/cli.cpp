#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include "dtcrs/chunker.hpp"
#include "dtcrs/config.hpp"
#include "dtcrs/datasets.hpp"
#include "dtcrs/error.hpp"
#include "dtcrs/eval.hpp"
#include "dtcrs/llm.hpp"
#include "dtcrs/pipeline.hpp"
#include "dtcrs/random.hpp"
#include "dtcrs/retrieval.hpp"
#include "dtcrs/tree_builder.hpp"
#include "dtcrs/tree_io.hpp"

namespace dtcrs::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  bool mock = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  bool no_classify = false;
  bool no_toc = false;
  bool hierarchical = false;
  std::string backend;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_flag("--mock", o.mock, "Use the offline LLM and embedding providers");
  cmd->add_option("--seed", o.seed, "Root RNG seed");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-classify", o.no_classify, "Route every question to a dynamic tree");
  cmd->add_flag("--no-toc", o.no_toc, "Decompose without the table of contents");
  cmd->add_flag("--hierarchical", o.hierarchical, "Split clusters down to the size cap");
  cmd->add_option("--reduction", o.backend, "Reduction backend")->check(CLI::IsMember({"manifold", "linear"}));
}

/// Usage-level failure: bad flags, missing inputs, invalid config.
class UsageError : public Error {
 public:
  using Error::Error;
};

void require_file(const std::string& path, const char* what) {
  std::error_code ec;
  if (path.empty() || !fs::is_regular_file(path, ec)) throw UsageError(std::string(what) + " '" + path + "' not found");
}

PipelineConfig make_config(const CommonOptions& o) {
  PipelineConfig cfg;
  try {
    if (!o.config_path.empty()) {
      require_file(o.config_path, "config file");
      cfg = load_config(o.config_path);
    }
    if (o.seed) cfg.rng_seed = *o.seed;
    if (o.jobs) cfg.jobs = *o.jobs;
    if (o.no_classify) cfg.no_classify = true;
    if (o.no_toc) cfg.no_toc = true;
    if (o.hierarchical) cfg.hierarchical_clustering = true;
    if (o.backend == "linear") cfg.reduction_backend = ReductionBackend::kLinear;
    if (o.backend == "manifold") cfg.reduction_backend = ReductionBackend::kManifold;
    if (o.mock) {
      cfg.providers.llm = "mock";
      cfg.providers.embedding = "test";
    }
    cfg.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

/// Plain text, or a JSON object with `text` and optional `id` / `title`.
Document read_document(const std::string& path) {
  require_file(path, "document");
  Document doc;
  doc.id = fs::path(path).stem().string();
  const std::string raw = read_file(path);
  if (fs::path(path).extension() == ".json") {
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw DataError("document '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
      throw DataError("document '" + path + "' needs a string field 'text'");
    }
    doc.text = j.at("text").get<std::string>();
    doc.id = j.value("id", doc.id);
    doc.title = j.value("title", std::string());
  } else {
    doc.text = raw;
  }
  if (doc.text.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError("document '" + path + "' is empty");
  return doc;
}

void print_tree_table(const SummaryTree& tree, std::ostream& out, bool timings = true) {
  const BuildStats& s = tree.stats();
  out << "layer  nodes\n";
  for (const auto& [layer, ids] : tree.layers()) out << std::setw(5) << layer << "  " << ids.size() << '\n';
  out << "summary calls       " << s.llm_summary_calls << '\n'
      << "clustering mode     " << s.clustering_mode << '\n';
  if (timings) {
    out << std::fixed << std::setprecision(3) << "clustering seconds  " << s.clustering_seconds << '\n'
        << "summarize seconds   " << s.summarization_seconds << '\n'
        << "total seconds       " << s.total_seconds << '\n';
    out.unsetf(std::ios::floatfield);
  } else {
    out << "timings             not stored in tree files\n";
  }
  for (const auto& w : s.warnings) out << "warning: " << w << '\n';
}

void write_output(const std::string& path, const std::string& contents) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file(path, contents);
}

// ---------------------------------------------------------------------------

struct BuildOptions {
  std::string doc;
  std::string question;
  std::string question_id = "q";
  std::string out = "tree.json";
  bool static_tree = false;
};

SummaryTree build_tree(Pipeline& pipeline, const PreparedDocument& prepared, const BuildOptions& b) {
  const PipelineConfig& cfg = pipeline.config();
  const std::uint64_t seed = derive_seed(cfg.rng_seed, b.static_tree ? std::string("static") : b.question_id);
  TreeBuildContext ctx{pipeline.gateway(), pipeline.embedder(), cfg, seed};
  if (b.static_tree) return build_static_tree(prepared.chunks, prepared.embeddings, ctx);
  TableOfContents toc;
  if (!cfg.no_toc) toc = pipeline.gateway().generate_toc(prepared.document);
  SubQuestionSet subqs = pipeline.gateway().decompose_question(b.question_id, b.question, toc, !cfg.no_toc);
  subqs.embeddings = pipeline.embedder().embed(subqs.sub_questions).vectors;
  return build_dynamic_tree(prepared.chunks, prepared.embeddings, subqs, ctx);
}

int cmd_build_tree(const CommonOptions& o, const BuildOptions& b, std::ostream& out) {
  if (!b.static_tree && b.question.empty()) throw UsageError("--question is required unless --static is given");
  PipelineConfig cfg = make_config(o);
  const Document doc = read_document(b.doc);
  Pipeline pipeline = Pipeline::from_config(cfg);
  const PreparedDocument prepared = pipeline.prepare(doc);
  SummaryTree tree = build_tree(pipeline, prepared, b);
  SerializeOptions opt;
  opt.include_timings = false;
  write_output(b.out, serialize_tree(tree, opt));
  out << "tree: " << b.out << '\n' << "chunks: " << prepared.chunks.size() << '\n';
  print_tree_table(tree, out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct QueryOptions {
  std::string doc;
  std::string tree;
  std::string question;
  std::string question_id = "q";
  std::string method = "auto";
  std::optional<std::size_t> k;
  std::optional<std::size_t> budget;
  std::string out;
};

int cmd_query(const CommonOptions& o, const QueryOptions& q, std::ostream& out) {
  if (q.doc.empty() == q.tree.empty()) throw UsageError("give exactly one of --doc or --tree");
  if (q.method == "auto" && q.doc.empty()) throw UsageError("--method auto needs --doc");
  PipelineConfig cfg = make_config(o);
  if (q.k) {
    if (*q.k == 0) throw UsageError("--k must be >= 1");
    cfg.dpr_top_k = *q.k;
  }
  if (q.budget && q.method == "auto") {
    if (*q.budget == 0) throw UsageError("--budget 0 requires an explicit --method");
    cfg.collapsed_budget_tokens = *q.budget;
  }
  Pipeline pipeline = Pipeline::from_config(cfg);

  QuestionRecord question;
  question.id = q.question_id;
  question.text = q.question;

  AnswerRecord rec;
  if (q.method == "auto") {
    const PreparedDocument prepared = pipeline.prepare(read_document(q.doc));
    question.doc_id = prepared.document.id;
    rec = pipeline.answer_question(question, prepared);
  } else {
    std::optional<PreparedDocument> prepared;
    std::optional<SummaryTree> tree;
    rec.question_id = question.id;
    if (!q.doc.empty()) {
      prepared = pipeline.prepare(read_document(q.doc));
      rec.doc_id = prepared->document.id;
      if (q.method != "dpr") {
        BuildOptions b;
        b.question = question.text;
        b.question_id = question.id;
        tree = build_tree(pipeline, *prepared, b);
        rec.tree_ref = rec.doc_id + "/" + question.id;
      }
    } else {
      require_file(q.tree, "tree file");
      tree = deserialize_tree(read_file(q.tree));
      rec.doc_id = tree->doc_id();
      rec.tree_ref = q.tree;
    }
    const EmbeddingVector qv = pipeline.embedder().embed_one(question.text);
    if (q.method == "dpr") {
      rec.route = Route::kDpr;
      if (prepared) {
        rec.retrieval = dpr_topk(qv, prepared->chunks, prepared->embeddings, cfg.dpr_top_k, question.id);
      } else {
        // Leaves of a stored tree stand in for the chunks.
        std::vector<Chunk> chunks;
        EmbeddingBatch emb;
        for (const auto& id : tree->layers().at(0)) {
          const SummaryNode* n = tree->find(id);
          Chunk c;
          c.id = n->id;
          c.doc_id = tree->doc_id();
          c.index = chunks.size();
          c.text = n->text;
          c.token_count = n->token_count;
          chunks.push_back(std::move(c));
          emb.vectors.push_back(n->embedding);
        }
        rec.retrieval = dpr_topk(qv, chunks, emb, cfg.dpr_top_k, question.id);
        for (std::size_t i = 0; i < rec.retrieval.items.size(); ++i) {
          for (std::size_t c = 0; c < chunks.size(); ++c) {
            if (rec.retrieval.items[i].node_id == leaf_node_id(c)) rec.retrieval.items[i].node_id = chunks[c].id;
          }
        }
        rec.tree_ref.reset();
      }
    } else {
      rec.route = Route::kTree;
      if (q.method == "collapsed") {
        rec.retrieval = collapsed_retrieve(qv, *tree, q.budget.value_or(cfg.collapsed_budget_tokens),
                                           cfg.collapsed_skip_overflow, question.id);
      } else {
        rec.retrieval = traverse_retrieve(qv, *tree, q.k.value_or(cfg.dpr_top_k), question.id);
      }
    }
    const AnswerResult a = pipeline.gateway().answer(question.text, rec.retrieval.texts());
    rec.answer = a.text;
    if (a.warning) rec.warnings.push_back(*a.warning);
    if (tree) rec.tree = std::move(tree);
  }

  const std::string body = to_json(rec).dump(2) + "\n";
  if (!q.out.empty()) write_output(q.out, body);
  out << body;
  if (!rec.ok()) return kTransport;
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string dataset;
  std::string data;
  std::string variant = "full";
  std::string out_dir = "eval_out";
  std::optional<std::size_t> limit;
};

int cmd_evaluate(const CommonOptions& o, const EvalOptions& e, std::ostream& out, std::ostream& err) {
  AblationVariant variant;
  DatasetKind kind;
  try {
    variant = ablation_variant_from_string(e.variant);
    kind = dataset_kind_from_string(e.dataset);
  } catch (const ArgumentError& ex) {
    throw UsageError(ex.what());
  }
  if (variant != AblationVariant::kFull && (o.no_classify || o.no_toc || o.hierarchical)) {
    throw UsageError("--variant cannot be combined with ablation flags");
  }
  PipelineConfig cfg = make_config(o);
  require_file(e.data, "dataset");
  Dataset ds = load_dataset(kind, e.data);
  for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
  if (e.limit && ds.questions.size() > *e.limit) ds.questions.resize(*e.limit);

  const auto& p = cfg.providers;
  const EvaluationRun run = run_ablation(
      variant, ds, cfg, make_llm_provider(p), make_embedding_provider(p),
      p.prompt_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::from_directory(p.prompt_dir));

  fs::create_directories(e.out_dir);
  const fs::path dir(e.out_dir);
  write_file((dir / "report.json").string(), to_json(run.report).dump(2) + "\n");
  std::ostringstream csv;
  write_csv(run.report, csv);
  write_file((dir / "report.csv").string(), csv.str());
  write_file((dir / "tree_stats.json").string(), to_json(run.tree_stats).dump(2) + "\n");
  std::string answers;
  for (const auto& r : run.records) answers += to_json(r).dump() + "\n";
  write_file((dir / "answers.jsonl").string(), answers);

  const auto names = run.report.metric_names();
  out << "dataset " << run.report.dataset << "  variant " << run.report.variant << "  questions "
      << run.report.per_question.size() << "  failed " << run.report.failed << '\n';
  out << std::left << std::setw(14) << "group";
  for (const auto& n : names) out << std::setw(10) << n;
  out << '\n' << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& label, const std::map<std::string, double>& scores) {
    out << std::setw(14) << label;
    for (const auto& n : names) {
      const auto it = scores.find(n);
      if (it == scores.end()) {
        out << std::setw(10) << "-";
      } else {
        out << std::setw(10) << it->second;
      }
    }
    out << '\n';
  };
  for (const auto& [type, scores] : run.report.per_type) row(type, scores);
  row("all", run.report.aggregates);
  out.unsetf(std::ios::floatfield);
  out << std::right << "reports: " << e.out_dir << '\n';

  for (const auto& r : run.records) {
    if (!r.ok()) err << "question " << r.question_id << " failed in " << r.error_phase.value_or("?") << ": " << *r.error << '\n';
  }
  for (const auto& r : run.records) {
    if (!r.ok() && r.error_phase != "prepare") return kTransport;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_stats(const std::vector<std::string>& trees, bool as_json, std::ostream& out) {
  if (trees.empty()) throw UsageError("give at least one tree file");
  std::vector<SummaryTree> loaded;
  for (const auto& path : trees) {
    require_file(path, "tree file");
    loaded.push_back(deserialize_tree(read_file(path)));
  }
  std::vector<const SummaryTree*> ptrs;
  for (const auto& t : loaded) ptrs.push_back(&t);
  const TreeStatsReport report = tree_stats(ptrs, {}, {});
  if (as_json) {
    json j = to_json(report);
    json per_tree = json::array();
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      per_tree.push_back({{"path", trees[i]}, {"stats", stats_to_json(loaded[i].stats())}});
    }
    j["trees"] = std::move(per_tree);
    out << j.dump(2) << '\n';
    return kOk;
  }
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    out << "== " << trees[i] << " (doc " << loaded[i].doc_id()
        << ", question " << loaded[i].question_id().value_or("-") << ")\n";
    print_tree_table(loaded[i], out, false);
  }
  out << "average nodes per layer over " << report.tree_count << " tree(s)\n";
  for (const auto& [layer, v] : report.avg_nodes_per_layer) out << std::setw(5) << layer << "  " << v << '\n';
  return kOk;
}

int cmd_toc(const CommonOptions& o, const std::string& doc_path, std::ostream& out) {
  PipelineConfig cfg = make_config(o);
  const Document doc = read_document(doc_path);
  Pipeline pipeline = Pipeline::from_config(cfg);
  const TableOfContents toc = pipeline.gateway().generate_toc(doc);
  out << toc.render();
  if (!toc.render().empty() && toc.render().back() != '\n') out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Question-conditioned summary trees for long-document QA", "dtcrs"};
  app.require_subcommand(1);

  CommonOptions common;
  BuildOptions build;
  QueryOptions query;
  EvalOptions eval;
  std::vector<std::string> stats_trees;
  bool stats_json = false;
  std::string toc_doc;

  auto* b = app.add_subcommand("build-tree", "Build a summary tree and write it as JSON");
  add_common(b, common);
  b->add_option("--doc", build.doc, "Document (text, or JSON with a 'text' field)")->required();
  b->add_option("--question", build.question, "Question the tree is built for");
  b->add_option("--question-id", build.question_id, "Question id stored in the tree");
  b->add_option("--out", build.out, "Output tree file");
  b->add_flag("--static", build.static_tree, "Question-independent tree");

  auto* q = app.add_subcommand("query", "Answer a question and emit the answer record as JSON");
  add_common(q, common);
  q->add_option("--doc", query.doc, "Document to answer from");
  q->add_option("--tree", query.tree, "Pre-built tree file");
  q->add_option("--question", query.question, "Question text")->required();
  q->add_option("--question-id", query.question_id, "Question id");
  q->add_option("--method", query.method, "auto routes by the classifier")
      ->check(CLI::IsMember({"auto", "collapsed", "dpr", "traversal"}));
  q->add_option("--k", query.k, "Top-k for dpr and traversal");
  q->add_option("--budget", query.budget, "Token budget for collapsed retrieval");
  q->add_option("--out", query.out, "Also write the record to this file");

  auto* e = app.add_subcommand("evaluate", "Run a dataset under an ablation variant and score it");
  add_common(e, common);
  e->add_option("--dataset", eval.dataset, "qasper, quality or narrativeqa")->required();
  e->add_option("--data", eval.data, "Dataset file")->required();
  e->add_option("--variant", eval.variant, "full, no_global, no_classify or no_toc");
  e->add_option("--out-dir", eval.out_dir, "Directory for report.json, report.csv, answers.jsonl, tree_stats.json");
  e->add_option("--limit", eval.limit, "Only the first N questions");

  auto* s = app.add_subcommand("stats", "Node counts and timings of stored trees");
  s->add_option("trees", stats_trees, "Tree files")->required();
  s->add_flag("--json", stats_json, "Emit JSON");

  auto* t = app.add_subcommand("toc", "Generate a document's table of contents");
  add_common(t, common);
  t->add_option("--doc", toc_doc, "Document")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  }

  try {
    if (b->parsed()) return cmd_build_tree(common, build, out);
    if (q->parsed()) return cmd_query(common, query, out);
    if (e->parsed()) return cmd_evaluate(common, eval, out, err);
    if (s->parsed()) return cmd_stats(stats_trees, stats_json, out);
    if (t->parsed()) return cmd_toc(common, toc_doc, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const PartialTreeError& ex) {
    err << "error: tree build failed at layer " << ex.failed_layer() << ": " << ex.what() << '\n';
    return kTransport;
  } catch (const TransportError& ex) {
    err << "error: provider failure: " << ex.what() << '\n';
    return kTransport;
  } catch (const ContractError& ex) {
    err << "error: provider contract violated: " << ex.what() << '\n';
    return kTransport;
  } catch (const ArgumentError& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace dtcrs::cli
