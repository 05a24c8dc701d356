#include "dtcrs/embedding.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include "dtcrs/error.hpp"
#include "dtcrs/random.hpp"
#include "dtcrs/tokenizer.hpp"
#include "dtcrs/tree_io.hpp"
#include "http_transport.hpp"

namespace dtcrs {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

EmbeddingBatch EmbeddingProvider::embed(const std::vector<std::string>& texts) const {
  if (texts.empty()) throw ArgumentError("embed: empty batch");
  for (const auto& t : texts) {
    if (t.empty()) throw ArgumentError("embed: empty text in batch");
  }
  auto vectors = do_embed(texts);
  if (vectors.size() != texts.size()) {
    throw ContractError(name() + " embedder returned " + std::to_string(vectors.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = vectors.front().dim();
  for (auto& v : vectors) {
    if (v.dim() != dim || dim == 0) {
      throw ContractError(name() + " embedder returned mixed or empty dimensions");
    }
    const double norm = l2_norm(v.values);
    if (!std::isfinite(norm) || norm == 0.0) {
      throw ContractError(name() + " embedder returned a zero or non-finite vector");
    }
    for (double& x : v.values) x /= norm;
  }
  return {texts, std::move(vectors)};
}

EmbeddingVector EmbeddingProvider::embed_one(const std::string& text) const {
  return embed({text}).vectors.front();
}

HashProjectionEmbedder::HashProjectionEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim == 0) throw ArgumentError("embedding dimension must be > 0");
}

std::vector<double> HashProjectionEmbedder::token_vector(const std::string& token) const {
  std::uint64_t state = fnv1a64(token) ^ splitmix64(seed_);
  Rng rng(splitmix64(state));
  std::vector<double> v(dim_);
  for (auto& x : v) x = normal01(rng);
  return v;
}

std::vector<EmbeddingVector> HashProjectionEmbedder::do_embed(
    const std::vector<std::string>& texts) const {
  const auto& tokenizer = *default_tokenizer();
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::map<std::string, std::size_t> counts;
    for (auto tok : tokenizer.tokens(text)) {
      if (!std::isalnum(static_cast<unsigned char>(tok[0])) &&
          static_cast<unsigned char>(tok[0]) < 0x80) {
        continue;
      }
      for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      ++counts[tok];
    }
    if (counts.empty()) counts[text] = 1;
    EmbeddingVector e;
    e.values.assign(dim_, 0.0);
    for (const auto& [tok, n] : counts) {
      const auto g = token_vector(tok);
      for (std::size_t d = 0; d < dim_; ++d) e.values[d] += static_cast<double>(n) * g[d];
    }
    out.push_back(std::move(e));
  }
  return out;
}

HttpEmbedder::HttpEmbedder(std::string url, double timeout_seconds, int max_retries)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds), max_retries_(max_retries) {}

std::vector<EmbeddingVector> HttpEmbedder::do_embed(const std::vector<std::string>& texts) const {
  detail::RetryPolicy policy{timeout_seconds_, max_retries_};
  const auto reply = detail::post_json(url_, {{"texts", texts}}, {}, policy);
  const auto it = reply.find("vectors");
  if (it == reply.end() || !it->is_array()) {
    throw TransportError(url_ + ": reply has no 'vectors' array");
  }
  std::vector<EmbeddingVector> out;
  for (const auto& row : *it) {
    if (!row.is_array()) throw TransportError(url_ + ": 'vectors' must hold arrays");
    EmbeddingVector e;
    for (const auto& x : row) {
      if (!x.is_number()) throw TransportError(url_ + ": vector entries must be numbers");
      e.values.push_back(x.get<double>());
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const ProviderSettings& settings) {
  if (settings.embedding == "test") {
    return std::make_shared<HashProjectionEmbedder>(settings.test_embedding_dim,
                                                    settings.test_embedding_seed);
  }
  return std::make_shared<HttpEmbedder>(settings.embedding_url, settings.timeout_seconds,
                                        settings.max_retries);
}

}  // namespace dtcrs
