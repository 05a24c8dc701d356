#include "dtcrs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "dtcrs/chunker.hpp"
#include "dtcrs/error.hpp"
#include "dtcrs/random.hpp"
#include "dtcrs/tree_builder.hpp"

namespace dtcrs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename F>
auto timed(std::map<std::string, double>& timings, const std::string& phase, F&& f) {
  const auto t0 = Clock::now();
  struct Record {
    std::map<std::string, double>& timings;
    const std::string& phase;
    Clock::time_point t0;
    ~Record() { timings[phase] += seconds_since(t0); }
  } record{timings, phase, t0};
  return f();
}

}  // namespace

const char* to_string(Route route) { return route == Route::kTree ? "tree" : "dpr"; }

const char* to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::kFull: return "full";
    case AblationVariant::kNoGlobal: return "no_global";
    case AblationVariant::kNoClassify: return "no_classify";
    case AblationVariant::kNoToc: return "no_toc";
  }
  return "full";
}

AblationVariant ablation_variant_from_string(const std::string& name) {
  if (name == "full") return AblationVariant::kFull;
  if (name == "no_global") return AblationVariant::kNoGlobal;
  if (name == "no_classify") return AblationVariant::kNoClassify;
  if (name == "no_toc") return AblationVariant::kNoToc;
  throw ArgumentError("unknown ablation variant '" + name + "' (expected full, no_global, no_classify, no_toc)");
}

PipelineConfig apply_variant(PipelineConfig config, AblationVariant variant) {
  switch (variant) {
    case AblationVariant::kFull: break;
    case AblationVariant::kNoGlobal: config.hierarchical_clustering = true; break;
    case AblationVariant::kNoClassify: config.no_classify = true; break;
    case AblationVariant::kNoToc: config.no_toc = true; break;
  }
  return config;
}

Prediction AnswerRecord::prediction() const { return {question_id, answer, choice, !ok()}; }

nlohmann::json to_json(const AnswerRecord& r, bool include_timings) {
  nlohmann::json j;
  j["question_id"] = r.question_id;
  j["doc_id"] = r.doc_id;
  j["route"] = to_string(r.route);
  j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
  j["sub_questions"] = r.sub_questions;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.retrieval.items) {
    items.push_back({{"node_id", it.node_id}, {"score", it.score}, {"layer", it.layer}, {"token_count", it.token_count}});
  }
  j["retrieval"] = {{"method", to_string(r.retrieval.method)}, {"items", std::move(items)},
                    {"total_tokens", r.retrieval.total_tokens}};
  j["answer"] = r.answer;
  j["choice"] = r.choice ? nlohmann::json(*r.choice) : nlohmann::json(nullptr);
  j["tree_ref"] = r.tree_ref ? nlohmann::json(*r.tree_ref) : nlohmann::json(nullptr);
  if (r.tree) {
    nlohmann::json layers = nlohmann::json::object();
    for (const auto& [layer, ids] : r.tree->layers()) layers[std::to_string(layer)] = ids.size();
    j["tree_layers"] = std::move(layers);
    j["clustering_mode"] = r.tree->stats().clustering_mode;
  }
  if (include_timings) j["timings"] = r.timings;
  j["warnings"] = r.warnings;
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  j["error_phase"] = r.error_phase ? nlohmann::json(*r.error_phase) : nlohmann::json(nullptr);
  return j;
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<LlmProvider> llm,
                   std::shared_ptr<const EmbeddingProvider> embedder, PromptTemplates templates)
    : config_(std::move(config)), embedder_(std::move(embedder)) {
  config_.validate();
  if (!embedder_) throw ArgumentError("pipeline needs an embedding provider");
  gateway_ = std::make_unique<LlmGateway>(std::move(llm), config_, std::move(templates));
}

Pipeline Pipeline::from_config(const PipelineConfig& config) {
  const auto& p = config.providers;
  return Pipeline(config, make_llm_provider(p), make_embedding_provider(p),
                  p.prompt_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::from_directory(p.prompt_dir));
}

PreparedDocument Pipeline::prepare(const Document& document) const {
  const auto t0 = Clock::now();
  PreparedDocument out;
  out.document = document;
  ChunkResult chunked = chunk_document(document, config_.chunk_size_limit, gateway_->tokenizer());
  if (chunked.chunks.empty()) throw DataError("document '" + document.id + "' has no text to chunk");
  out.chunks = std::move(chunked.chunks);
  out.warnings = std::move(chunked.warnings);
  std::vector<std::string> texts;
  texts.reserve(out.chunks.size());
  for (const auto& c : out.chunks) texts.push_back(c.text);
  out.embeddings = embedder_->embed(texts);
  out.seconds = seconds_since(t0);
  return out;
}

AnswerRecord Pipeline::answer_question(const QuestionRecord& question, const PreparedDocument& prepared) {
  const auto started = Clock::now();
  AnswerRecord rec;
  rec.question_id = question.id;
  rec.doc_id = prepared.document.id;
  const std::uint64_t seed = derive_seed(config_.rng_seed, question.id);
  std::string phase;
  auto& t = rec.timings;

  try {
    TableOfContents toc;
    if (!config_.no_classify || !config_.no_toc) {
      phase = "toc";
      toc = timed(t, phase, [&] { return gateway_->generate_toc(prepared.document); });
      if (toc.degraded) rec.warnings.push_back("table of contents reply was not a list; using raw text");
    }

    int label = 1;
    if (!config_.no_classify) {
      phase = "classify";
      const ClassifyResult c = timed(t, phase, [&] { return gateway_->classify_question(question.text, toc); });
      label = c.label;
      rec.label = label;
      if (c.warning) rec.warnings.push_back(*c.warning);
    }

    if (label == 1) {
      rec.route = Route::kTree;
      phase = "decompose";
      SubQuestionSet subqs = timed(t, phase, [&] {
        SubQuestionSet s = gateway_->decompose_question(question.id, question.text, toc, !config_.no_toc);
        s.embeddings = embedder_->embed(s.sub_questions).vectors;
        return s;
      });
      if (subqs.fallback) rec.warnings.push_back("decomposition reply unusable; using the question itself");
      rec.sub_questions = subqs.sub_questions;

      phase = "build";
      rec.tree_ref = prepared.document.id + "/" + question.id;
      TreeBuildContext ctx{*gateway_, *embedder_, config_, seed};
      try {
        rec.tree = timed(t, phase, [&] { return build_dynamic_tree(prepared.chunks, prepared.embeddings, subqs, ctx); });
      } catch (const PartialTreeError& e) {
        rec.tree = e.partial();
        throw;
      }
      for (const auto& w : rec.tree->stats().warnings) rec.warnings.push_back(w);

      phase = "retrieve";
      rec.retrieval = timed(t, phase, [&] {
        const EmbeddingVector q = embedder_->embed_one(question.text);
        return collapsed_retrieve(q, *rec.tree, config_.collapsed_budget_tokens, config_.collapsed_skip_overflow,
                                  question.id);
      });
    } else {
      rec.route = Route::kDpr;
      phase = "retrieve";
      rec.retrieval = timed(t, phase, [&] {
        const EmbeddingVector q = embedder_->embed_one(question.text);
        return dpr_topk(q, prepared.chunks, prepared.embeddings, config_.dpr_top_k, question.id);
      });
    }

    phase = "answer";
    const AnswerResult a = timed(t, phase, [&] { return gateway_->answer(question.text, rec.retrieval.texts(), question.options); });
    rec.answer = a.text;
    rec.choice = a.choice;
    if (a.warning) rec.warnings.push_back(*a.warning);
  } catch (const TransportError& e) {
    rec.error = e.what();
    rec.error_phase = phase;
  } catch (const ContractError& e) {
    rec.error = e.what();
    rec.error_phase = phase;
  }
  t["total"] = seconds_since(started);
  return rec;
}

EvaluationRun run_ablation(AblationVariant variant, const Dataset& dataset, const PipelineConfig& config,
                           std::shared_ptr<LlmProvider> llm, std::shared_ptr<const EmbeddingProvider> embedder,
                           PromptTemplates templates) {
  PipelineConfig cfg = apply_variant(config, variant);
  const std::size_t jobs = std::max<std::size_t>(1, std::min(config.jobs, dataset.questions.size()));
  // Parallelism goes to questions; each tree build then summarizes serially.
  if (jobs > 1) cfg.jobs = 1;
  Pipeline pipeline(cfg, std::move(llm), std::move(embedder), std::move(templates));

  std::map<std::string, PreparedDocument> prepared;
  std::map<std::string, std::string> prepare_errors;
  for (const auto& doc : dataset.documents) {
    try {
      prepared.emplace(doc.id, pipeline.prepare(doc));
    } catch (const Error& e) {
      prepare_errors.emplace(doc.id, e.what());
    }
  }

  std::vector<AnswerRecord> records(dataset.questions.size());
  std::vector<std::exception_ptr> failures(dataset.questions.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.questions.size(); i = next++) {
      const QuestionRecord& q = dataset.questions[i];
      try {
        const auto it = prepared.find(q.doc_id);
        if (it == prepared.end()) {
          AnswerRecord r;
          r.question_id = q.id;
          r.doc_id = q.doc_id;
          const auto err = prepare_errors.find(q.doc_id);
          r.error = err != prepare_errors.end() ? err->second : "document '" + q.doc_id + "' not found";
          r.error_phase = "prepare";
          records[i] = std::move(r);
        } else {
          records[i] = pipeline.answer_question(q, it->second);
        }
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::sort(records.begin(), records.end(),
            [](const AnswerRecord& a, const AnswerRecord& b) { return a.question_id < b.question_id; });

  EvaluationRun run;
  run.variant = variant;
  std::vector<Prediction> predictions;
  for (const auto& r : records) predictions.push_back(r.prediction());
  run.report = score_predictions(dataset.kind, dataset.questions, predictions);
  run.report.variant = to_string(variant);

  std::map<std::string, const QuestionRecord*> by_id;
  for (const auto& q : dataset.questions) by_id[q.id] = &q;
  std::vector<const SummaryTree*> trees;
  std::vector<RetrievalResult> retrievals;
  std::vector<std::vector<std::string>> evidence;
  for (const auto& r : records) {
    if (!r.tree || !r.ok()) continue;
    trees.push_back(&*r.tree);
    retrievals.push_back(r.retrieval);
    const QuestionRecord* q = by_id[r.question_id];
    evidence.push_back(q->gold_evidence.value_or(std::vector<std::string>{}));
  }
  run.tree_stats = tree_stats(trees, retrievals, evidence);
  run.records = std::move(records);
  return run;
}

}  // namespace dtcrs
