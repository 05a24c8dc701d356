#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <vector>

#include "dtcrs/config.hpp"
#include "dtcrs/tokenizer.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

struct LlmRequest {
  LlmStep step = LlmStep::kAnswerFreeform;
  std::string prompt;
  double temperature = 0.0;
  std::size_t max_tokens = 256;
  /// The placeholder values the prompt was rendered from.
  std::map<std::string, std::string> fields;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  /// Returns the raw completion text; throws TransportError on failure.
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Chat-completion endpoint in the OpenAI wire format.
class HttpLlmProvider final : public LlmProvider {
 public:
  HttpLlmProvider(std::string base_url, std::string model, std::string api_key,
                  double timeout_seconds, int max_retries, double backoff_base_seconds = 0.5);

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "http"; }

  /// `base_url` as given when it already names the completions route,
  /// otherwise `base_url` + "/v1/chat/completions".
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  double timeout_seconds_;
  int max_retries_;
  double backoff_base_seconds_;
};

/// Offline provider for tests and `--mock` runs.
///
/// Reply lookup order: exact (step, prompt digest) script, then a per-step
/// script, then a deterministic fallback computed from the request fields.
/// Every call is appended to a transcript.
class MockLlmProvider final : public LlmProvider {
 public:
  struct Entry {
    LlmStep step;
    double temperature;
    std::size_t max_tokens;
    std::string prompt_digest;
    std::string reply;
    std::string source;  // "script", "step" or "fallback"
  };

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "mock"; }

  void script(LlmStep step, const std::string& prompt, std::string reply);
  void script_step(LlmStep step, std::string reply);
  void clear_step_script(LlmStep step);
  /// Calls for `step` throw TransportError.
  void fail_step(LlmStep step);
  /// Number of context tokens the summary fallback echoes.
  void set_summary_echo_tokens(std::size_t n);

  std::vector<Entry> transcript() const;
  std::size_t call_count() const;
  std::size_t call_count(LlmStep step) const;
  void clear_transcript();

  static std::string digest(const std::string& prompt);

 private:
  std::string fallback(const LlmRequest& request) const;

  mutable std::mutex mutex_;
  std::map<std::pair<LlmStep, std::string>, std::string> scripted_;
  std::map<LlmStep, std::string> step_scripted_;
  std::set<LlmStep> failing_;
  std::size_t summary_echo_tokens_ = 60;
  std::vector<Entry> log_;
};

/// Prompt templates with `{name}` placeholders. Names: toc, classify,
/// decompose, decompose_no_toc, summarize, answer_freeform, answer_choice.
class PromptTemplates {
 public:
  /// The templates shipped in the prompts/ directory, compiled in.
  static PromptTemplates builtin();
  /// Built-in set with any `<name>.txt` found in `dir` overriding it.
  static PromptTemplates from_directory(const std::string& dir);

  const std::string& get(const std::string& name) const;
  std::string render(const std::string& name, const std::map<std::string, std::string>& fields) const;

 private:
  std::map<std::string, std::string> templates_;
};

struct ClassifyResult {
  int label = 0;
  std::optional<std::string> warning;
};

struct SummaryResult {
  std::string text;
  std::size_t token_count = 0;
  bool truncated = false;
};

struct AnswerResult {
  std::string text;
  std::optional<std::size_t> choice;
  std::size_t context_items_used = 0;
  std::optional<std::string> warning;
};

/// Step-level LLM operations: builds prompts, routes temperatures, bounds
/// in-flight requests and parses replies. Parse failures degrade to
/// documented fallbacks; only transport errors propagate.
class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<LlmProvider> provider, const PipelineConfig& config,
             PromptTemplates templates = PromptTemplates::builtin(),
             std::shared_ptr<const Tokenizer> tokenizer = default_tokenizer());

  TableOfContents generate_toc(const Document& document);
  ClassifyResult classify_question(const std::string& question, const TableOfContents& toc);
  /// With `use_toc` false the ToC is left out of the prompt entirely.
  SubQuestionSet decompose_question(const std::string& question_id, const std::string& question,
                                    const TableOfContents& toc, bool use_toc = true);
  SummaryResult summarize_cluster(const std::vector<std::string>& texts, std::size_t max_tokens);
  /// `context` must be rank-ordered; items are packed best-first until the
  /// provider context is full.
  AnswerResult answer(const std::string& question, const std::vector<std::string>& context,
                      const std::optional<std::vector<std::string>>& options = std::nullopt);

  LlmProvider& provider() { return *provider_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }

 private:
  std::string call(LlmStep step, const std::string& template_name,
                   std::map<std::string, std::string> fields, std::size_t max_tokens);

  std::shared_ptr<LlmProvider> provider_;
  std::map<LlmStep, double> temperatures_;
  std::size_t context_tokens_;
  PromptTemplates templates_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

/// Reply parsers, exposed for testing.
namespace parse {

TableOfContents toc(const std::string& reply);
/// nullopt when the reply matches nothing in the label table.
std::optional<int> binary_label(const std::string& reply);
std::vector<std::string> sub_questions(const std::string& reply);
std::string freeform_answer(const std::string& reply);
std::optional<std::size_t> choice(const std::string& reply, const std::vector<std::string>& options);

}  // namespace parse

std::shared_ptr<LlmProvider> make_llm_provider(const ProviderSettings& settings);

/// HTTP requests attempted by this process (each retry counts).
std::size_t network_request_count();

}  // namespace dtcrs
