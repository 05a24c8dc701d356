#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dtcrs/config.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs {

struct EmbeddingBatch {
  std::vector<std::string> texts;
  std::vector<EmbeddingVector> vectors;

  std::size_t size() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().dim(); }
};

/// Source of text embeddings. `embed` validates the backend output and
/// L2-normalizes every vector, so downstream cosine similarity is a dot
/// product.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  /// Throws ArgumentError for an empty batch or empty text, ContractError
  /// when the backend returns the wrong count, mixed dimensions, zero or
  /// non-finite vectors.
  EmbeddingBatch embed(const std::vector<std::string>& texts) const;

  EmbeddingVector embed_one(const std::string& text) const;

  virtual std::string name() const = 0;

 private:
  virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) const = 0;
};

/// Deterministic offline embedder: a seeded random projection of token
/// counts.
///
/// Each lowercased word token w contributes count(w) * g(w), where g(w) is a
/// `dim`-vector of standard normals (Box-Muller, see normal01) drawn from an
/// mt19937_64 seeded with splitmix64(fnv1a64(w) ^ splitmix64(seed)). Texts without word
/// tokens use the whole text as their single token. Texts sharing tokens
/// therefore get correlated vectors.
class HashProjectionEmbedder final : public EmbeddingProvider {
 public:
  explicit HashProjectionEmbedder(std::size_t dim = 16, std::uint64_t seed = 17);

  std::string name() const override { return "test"; }
  std::size_t dim() const { return dim_; }

  /// Unnormalized projection of one token (exposed for tests).
  std::vector<double> token_vector(const std::string& token) const;

 private:
  std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) const override;

  std::size_t dim_;
  std::uint64_t seed_;
};

/// Posts `{"texts": [...]}` to a URL and expects `{"vectors": [[...], ...]}`.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  HttpEmbedder(std::string url, double timeout_seconds, int max_retries);

  std::string name() const override { return "http"; }

 private:
  std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) const override;

  std::string url_;
  double timeout_seconds_;
  int max_retries_;
};

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const ProviderSettings& settings);

double l2_norm(const std::vector<double>& v);

}  // namespace dtcrs
