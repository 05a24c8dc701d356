#include "dtcrs/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <sstream>

#include "dtcrs/chunker.hpp"
#include "dtcrs/error.hpp"
#include "dtcrs/tree_io.hpp"
#include "http_transport.hpp"
#include "prompts_builtin.hpp"

namespace dtcrs {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::string first_tokens(const std::string& text, std::size_t n) {
  return default_tokenizer()->truncate(text, n).first;
}

// Alphanumeric runs of `s`, case preserved.
std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string strip_answer_label(std::string s) {
  static const std::regex label(R"(^\s*(?:final\s+)?answer\s*[:\-]\s*)", std::regex::icase);
  s = std::regex_replace(s, label, "", std::regex_constants::format_first_only);
  return trim(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Reply parsers

namespace parse {

TableOfContents toc(const std::string& reply) {
  static const std::regex numbered(R"(^(\d+(?:\.\d+)*)\.?\)?\s+(.+)$)");
  static const std::regex roman(R"(^([IVXLC]+)[.)]\s+(.+)$)");
  static const std::regex bullet(R"(^(?:[-*+]|\xE2\x80\xA2)\s+(.+)$)");
  static const std::regex markdown(R"(^(#+)\s*(.+)$)");
  TableOfContents out;
  out.raw_text = reply;
  for (const auto& raw : split_lines(reply)) {
    std::size_t indent = 0;
    for (char c : raw) {
      if (c == ' ') {
        indent += 1;
      } else if (c == '\t') {
        indent += 4;
      } else {
        break;
      }
    }
    const std::string line = trim(raw);
    if (line.empty()) continue;
    std::smatch m;
    TocEntry entry;
    if (std::regex_match(line, m, markdown)) {
      entry.level = static_cast<int>(m[1].length());
      entry.heading = trim(m[2].str());
    } else if (std::regex_match(line, m, numbered)) {
      const std::string num = m[1].str();
      entry.level = 1 + static_cast<int>(std::count(num.begin(), num.end(), '.'));
      entry.heading = trim(m[2].str());
    } else if (std::regex_match(line, m, roman)) {
      entry.level = 1;
      entry.heading = trim(m[2].str());
    } else if (std::regex_match(line, m, bullet)) {
      entry.level = 1 + static_cast<int>(indent / 2);
      entry.heading = trim(m[1].str());
    } else {
      continue;
    }
    if (!entry.heading.empty()) out.entries.push_back(std::move(entry));
  }
  if (out.entries.empty()) {
    out.degraded = true;
    out.entries.push_back({1, trim(reply)});
  }
  return out;
}

std::optional<int> binary_label(const std::string& reply) {
  static const std::map<std::string, int> table = {
      {"1", 1},    {"yes", 1}, {"true", 1},  {"y", 1},     {"complex", 1}, {"multiple", 1},
      {"0", 0},    {"no", 0},  {"false", 0}, {"n", 0},     {"simple", 0},  {"single", 0}};
  for (const auto& w : words(lower(reply))) {
    if (const auto it = table.find(w); it != table.end()) return it->second;
  }
  return std::nullopt;
}

std::vector<std::string> sub_questions(const std::string& reply) {
  static const std::regex marker(
      R"(^(?:(?:q|sub-?question)\s*\d+\s*[:.)\-]\s*|\(?\d+\s*[.):]\s*|(?:[-*+]|\xE2\x80\xA2)\s+))",
      std::regex::icase);
  std::vector<std::string> out;
  for (const auto& raw : split_lines(reply)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    line = trim(std::regex_replace(line, marker, "", std::regex_constants::format_first_only));
    if (line.empty() || line.back() == ':') continue;
    out.push_back(std::move(line));
  }
  return out;
}

std::string freeform_answer(const std::string& reply) {
  std::string s = strip_answer_label(trim(reply));
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::optional<std::size_t> choice(const std::string& reply, const std::vector<std::string>& options) {
  const std::string s = strip_answer_label(trim(reply));
  const std::size_t k = options.size();
  for (const auto& w : words(s)) {
    if (w.size() == 1 && std::isupper(static_cast<unsigned char>(w[0]))) {
      // Out-of-range letters ("I think B") are skipped rather than trusted.
      const std::size_t ordinal = static_cast<std::size_t>(w[0] - 'A');
      if (ordinal < k) return ordinal;
      continue;
    }
    if (std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      const std::size_t v = static_cast<std::size_t>(std::strtoull(w.c_str(), nullptr, 10));
      if (v >= 1 && v <= k) return v - 1;
      continue;
    }
  }
  const std::string ls = lower(s);
  for (std::size_t i = 0; i < k; ++i) {
    const std::string opt = lower(trim(options[i]));
    if (!opt.empty() && ls.find(opt) != std::string::npos) return i;
  }
  if (s.size() == 1 && std::islower(static_cast<unsigned char>(s[0]))) {
    const std::size_t ordinal = static_cast<std::size_t>(s[0] - 'a');
    if (ordinal < k) return ordinal;
  }
  return std::nullopt;
}

}  // namespace parse

// ---------------------------------------------------------------------------
// Providers

HttpLlmProvider::HttpLlmProvider(std::string base_url, std::string model, std::string api_key,
                                 double timeout_seconds, int max_retries,
                                 double backoff_base_seconds)
    : model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds),
      max_retries_(max_retries),
      backoff_base_seconds_(backoff_base_seconds) {
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  endpoint_ = base_url.find("/chat/completions") != std::string::npos
                  ? base_url
                  : base_url + "/v1/chat/completions";
}

std::string HttpLlmProvider::complete(const LlmRequest& request) {
  const nlohmann::json body = {
      {"model", model_},
      {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  std::vector<std::pair<std::string, std::string>> headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  const auto reply = detail::post_json(endpoint_, body, headers,
                                       {timeout_seconds_, max_retries_, backoff_base_seconds_});
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(endpoint_ + ": unexpected completion payload: " + e.what());
  }
}

std::string MockLlmProvider::digest(const std::string& prompt) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
  return buf;
}

void MockLlmProvider::script(LlmStep step, const std::string& prompt, std::string reply) {
  std::lock_guard lock(mutex_);
  scripted_[{step, digest(prompt)}] = std::move(reply);
}

void MockLlmProvider::script_step(LlmStep step, std::string reply) {
  std::lock_guard lock(mutex_);
  step_scripted_[step] = std::move(reply);
}

void MockLlmProvider::clear_step_script(LlmStep step) {
  std::lock_guard lock(mutex_);
  step_scripted_.erase(step);
}

void MockLlmProvider::fail_step(LlmStep step) {
  std::lock_guard lock(mutex_);
  failing_.insert(step);
}

void MockLlmProvider::set_summary_echo_tokens(std::size_t n) {
  std::lock_guard lock(mutex_);
  summary_echo_tokens_ = n;
}

std::string MockLlmProvider::fallback(const LlmRequest& request) const {
  const auto field = [&](const char* name) -> std::string {
    const auto it = request.fields.find(name);
    return it == request.fields.end() ? std::string() : it->second;
  };
  switch (request.step) {
    case LlmStep::kToc: {
      const std::string doc = field("document");
      const auto sentences = split_sentences(doc);
      if (sentences.empty()) return "";
      std::string out;
      const std::size_t n = sentences.size();
      const std::size_t picks = std::min<std::size_t>(3, n);
      for (std::size_t i = 0; i < picks; ++i) {
        const auto& s = sentences[i * n / picks];
        out += std::to_string(i + 1) + ". " + first_tokens(doc.substr(s.start, s.end - s.start), 6) + "\n";
      }
      return out;
    }
    case LlmStep::kClassify: {
      static const char* kCues[] = {"summar", "overall", "compare", "contrast", "why", "how does",
                                    "how do", "explain", "describe", "main contribution",
                                    "relationship", "discuss"};
      const std::string q = lower(field("question"));
      for (const char* cue : kCues) {
        if (q.find(cue) != std::string::npos) return "1";
      }
      return "0";
    }
    case LlmStep::kDecompose: {
      const std::string q = field("question");
      std::vector<std::string> headings;
      for (const auto& line : split_lines(field("toc"))) {
        std::string h = trim(line);
        if (h.rfind("- ", 0) == 0) h = trim(h.substr(2));
        if (!h.empty()) headings.push_back(h);
        if (headings.size() == 4) break;
      }
      if (headings.empty()) return "1. " + q;
      std::string out;
      for (std::size_t i = 0; i < headings.size(); ++i) {
        out += std::to_string(i + 1) + ". What does the part about " + headings[i] +
               " say regarding: " + q + "\n";
      }
      return out;
    }
    case LlmStep::kSummarize:
      return first_tokens(field("context"), summary_echo_tokens_);
    case LlmStep::kAnswerFreeform: {
      const std::string ctx = field("context");
      return ctx.empty() ? "Unanswerable" : "Answer: " + first_tokens(ctx, 12);
    }
    case LlmStep::kAnswerChoice:
      return "A";
  }
  return "";
}

std::string MockLlmProvider::complete(const LlmRequest& request) {
  std::lock_guard lock(mutex_);
  Entry entry{request.step, request.temperature, request.max_tokens, digest(request.prompt), {}, {}};
  if (failing_.contains(request.step)) {
    entry.source = "failure";
    log_.push_back(entry);
    throw TransportError(std::string("mock transport failure for step ") + to_string(request.step));
  }
  if (const auto it = scripted_.find({request.step, entry.prompt_digest}); it != scripted_.end()) {
    entry.reply = it->second;
    entry.source = "script";
  } else if (const auto st = step_scripted_.find(request.step); st != step_scripted_.end()) {
    entry.reply = st->second;
    entry.source = "step";
  } else {
    entry.reply = fallback(request);
    entry.source = "fallback";
  }
  log_.push_back(entry);
  return entry.reply;
}

std::vector<MockLlmProvider::Entry> MockLlmProvider::transcript() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t MockLlmProvider::call_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::size_t MockLlmProvider::call_count(LlmStep step) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(), [&](const Entry& e) { return e.step == step; }));
}

void MockLlmProvider::clear_transcript() {
  std::lock_guard lock(mutex_);
  log_.clear();
}

std::shared_ptr<LlmProvider> make_llm_provider(const ProviderSettings& settings) {
  if (settings.llm == "mock") return std::make_shared<MockLlmProvider>();
  std::string base_url = settings.base_url;
  std::string model = settings.model_name;
  std::string key;
  if (const char* v = std::getenv("DTCRS_BASE_URL"); v != nullptr && *v != '\0') base_url = v;
  if (const char* v = std::getenv("DTCRS_MODEL"); v != nullptr && *v != '\0') model = v;
  if (const char* v = std::getenv("DTCRS_API_KEY"); v != nullptr) key = v;
  return std::make_shared<HttpLlmProvider>(base_url, model, key, settings.timeout_seconds,
                                           settings.max_retries);
}

// ---------------------------------------------------------------------------
// Templates

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  t.templates_ = detail::builtin_prompts();
  return t;
}

PromptTemplates PromptTemplates::from_directory(const std::string& dir) {
  PromptTemplates t = builtin();
  if (!std::filesystem::is_directory(dir)) throw ArgumentError("prompt directory '" + dir + "' not found");
  for (auto& [name, text] : t.templates_) {
    const auto path = std::filesystem::path(dir) / (name + ".txt");
    if (std::filesystem::exists(path)) text = read_file(path.string());
  }
  return t;
}

const std::string& PromptTemplates::get(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) throw ArgumentError("unknown prompt template '" + name + "'");
  return it->second;
}

std::string PromptTemplates::render(const std::string& name,
                                    const std::map<std::string, std::string>& fields) const {
  const std::string& tpl = get(name);
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const auto open = tpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    const auto close = tpl.find('}', open);
    if (close == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    out.append(tpl, pos, open - pos);
    const std::string key = tpl.substr(open + 1, close - open - 1);
    if (const auto it = fields.find(key); it != fields.end()) {
      out += it->second;
    } else {
      out.append(tpl, open, close - open + 1);
    }
    pos = close + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(std::shared_ptr<LlmProvider> provider, const PipelineConfig& config,
                       PromptTemplates templates, std::shared_ptr<const Tokenizer> tokenizer)
    : provider_(std::move(provider)),
      temperatures_(config.temperatures),
      context_tokens_(config.providers.context_tokens),
      templates_(std::move(templates)),
      tokenizer_(std::move(tokenizer)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(config.providers.max_in_flight))) {
  if (!provider_) throw ArgumentError("LlmGateway needs a provider");
}

std::string LlmGateway::call(LlmStep step, const std::string& template_name,
                             std::map<std::string, std::string> fields, std::size_t max_tokens) {
  LlmRequest request;
  request.step = step;
  request.prompt = templates_.render(template_name, fields);
  const auto it = temperatures_.find(step);
  request.temperature = it == temperatures_.end() ? default_temperature(step) : it->second;
  request.max_tokens = std::max<std::size_t>(1, max_tokens);
  request.fields = std::move(fields);
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{in_flight_.get()};
  return provider_->complete(request);
}

TableOfContents LlmGateway::generate_toc(const Document& document) {
  if (document.text.empty()) throw ArgumentError("generate_toc: document text is empty");
  const std::size_t overhead = tokenizer_->count(templates_.render("toc", {{"document", ""}}));
  const std::size_t budget = context_tokens_ > overhead ? context_tokens_ - overhead : 1;
  auto [text, truncated] = tokenizer_->truncate(document.text, budget);
  const std::string reply = call(LlmStep::kToc, "toc", {{"document", text}}, 512);
  TableOfContents toc = parse::toc(reply);
  toc.truncated = truncated;
  return toc;
}

ClassifyResult LlmGateway::classify_question(const std::string& question,
                                             const TableOfContents& toc) {
  if (trim(question).empty()) throw ArgumentError("classify_question: empty question");
  const std::string reply =
      call(LlmStep::kClassify, "classify", {{"question", question}, {"toc", toc.render()}}, 8);
  ClassifyResult result;
  if (const auto label = parse::binary_label(reply)) {
    result.label = *label;
  } else {
    result.label = 0;
    result.warning = "unparseable classifier reply '" + first_tokens(reply, 20) + "', routing to DPR";
  }
  return result;
}

SubQuestionSet LlmGateway::decompose_question(const std::string& question_id,
                                              const std::string& question,
                                              const TableOfContents& toc, bool use_toc) {
  if (trim(question).empty()) throw ArgumentError("decompose_question: empty question");
  const std::string reply =
      use_toc ? call(LlmStep::kDecompose, "decompose",
                     {{"question", question}, {"toc", toc.render()}}, 256)
              : call(LlmStep::kDecompose, "decompose_no_toc", {{"question", question}}, 256);
  SubQuestionSet set;
  set.question_id = question_id;
  set.sub_questions = parse::sub_questions(reply);
  if (set.sub_questions.empty()) {
    set.sub_questions = {question};
    set.fallback = true;
  }
  return set;
}

SummaryResult LlmGateway::summarize_cluster(const std::vector<std::string>& texts,
                                            std::size_t max_tokens) {
  if (texts.empty()) throw ArgumentError("summarize_cluster: no texts");
  if (max_tokens == 0) throw ArgumentError("summarize_cluster: max_tokens must be > 0");
  std::string context;
  for (const auto& t : texts) {
    if (!context.empty()) context += "\n\n";
    context += t;
  }
  const std::string reply =
      call(LlmStep::kSummarize, "summarize",
           {{"context", context}, {"max_tokens", std::to_string(max_tokens)}}, max_tokens);
  auto [text, truncated] = tokenizer_->truncate(trim(reply), max_tokens);
  SummaryResult result;
  result.token_count = tokenizer_->count(text);
  result.text = std::move(text);
  result.truncated = truncated;
  return result;
}

AnswerResult LlmGateway::answer(const std::string& question, const std::vector<std::string>& context,
                                const std::optional<std::vector<std::string>>& options) {
  std::string rendered_options;
  if (options) {
    for (std::size_t i = 0; i < options->size(); ++i) {
      rendered_options += std::string(1, static_cast<char>('A' + i)) + ". " + (*options)[i] + "\n";
    }
  }
  const std::string tpl = options ? "answer_choice" : "answer_freeform";
  const std::size_t overhead = tokenizer_->count(templates_.render(
      tpl, {{"question", question}, {"context", ""}, {"options", rendered_options}}));
  const std::size_t budget = context_tokens_ > overhead ? context_tokens_ - overhead : 0;
  std::string packed;
  std::size_t used_tokens = 0;
  AnswerResult result;
  for (const auto& item : context) {
    const std::size_t t = tokenizer_->count(item);
    if (used_tokens + t > budget) break;
    if (!packed.empty()) packed += "\n\n";
    packed += item;
    used_tokens += t;
    ++result.context_items_used;
  }
  if (options) {
    const std::string reply = call(LlmStep::kAnswerChoice, tpl,
                                   {{"question", question}, {"context", packed}, {"options", rendered_options}},
                                   16);
    result.text = trim(reply);
    if (const auto c = parse::choice(reply, *options)) {
      result.choice = *c;
    } else {
      result.choice = 0;
      result.warning = "unparseable choice reply '" + first_tokens(reply, 20) + "', using option 0";
    }
  } else {
    const std::string reply =
        call(LlmStep::kAnswerFreeform, tpl, {{"question", question}, {"context", packed}}, 256);
    result.text = parse::freeform_answer(reply);
  }
  return result;
}

}  // namespace dtcrs
