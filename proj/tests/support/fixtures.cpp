#include "fixtures.hpp"

#include <atomic>
#include <sstream>

#include "dtcrs/tokenizer.hpp"
#include "dtcrs/tree_builder.hpp"

#include <unistd.h>

namespace dtcrs::testing {

Blobs make_blobs(const Eigen::MatrixXd& centers, std::size_t per_blob, double sigma, Rng& rng) {
  Blobs b;
  b.centers = centers;
  const auto k = static_cast<std::size_t>(centers.rows());
  b.points.resize(static_cast<Eigen::Index>(k * per_blob), centers.cols());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      const auto row = static_cast<Eigen::Index>(c * per_blob + i);
      for (Eigen::Index d = 0; d < centers.cols(); ++d) {
        b.points(row, d) = centers(static_cast<Eigen::Index>(c), d) + sigma * normal01(rng);
      }
      b.labels.push_back(c);
    }
  }
  return b;
}

Eigen::MatrixXd spread_centers(std::size_t count, std::size_t dim, double min_gap, Rng& rng) {
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  const double box = min_gap * static_cast<double>(count + 1);
  std::size_t placed = 0;
  while (placed < count) {
    Eigen::RowVectorXd c(static_cast<Eigen::Index>(dim));
    for (Eigen::Index d = 0; d < c.size(); ++d) c(d) = (uniform01(rng) * 2.0 - 1.0) * box;
    bool ok = true;
    for (std::size_t j = 0; j < placed && ok; ++j) {
      ok = (centers.row(static_cast<Eigen::Index>(j)) - c).norm() >= min_gap;
    }
    if (ok) centers.row(static_cast<Eigen::Index>(placed++)) = c;
  }
  return centers;
}

std::vector<std::string> topic_words(std::size_t topic, std::size_t count) {
  static const char* const kSyllables[] = {"ka", "lo", "mi", "ru", "te", "vo", "zan", "pel",
                                           "dor", "fi", "gu", "sha", "ne", "bri", "tor", "qua"};
  std::vector<std::string> words;
  for (std::size_t i = 0; i < count; ++i) {
    std::string w = "t" + std::to_string(topic);
    w += kSyllables[(topic * 7 + i) % 16];
    w += kSyllables[(i * 5 + 3) % 16];
    w += std::to_string(i);
    words.push_back(w);
  }
  return words;
}

std::string topic_sentence(std::size_t topic, Rng& rng, std::size_t words) {
  const auto vocab = topic_words(topic);
  std::string s = "The";
  for (std::size_t i = 0; i < words; ++i) {
    s += ' ';
    s += vocab[uniform_index(rng, vocab.size())];
  }
  s += '.';
  return s;
}

Document topic_document(const std::string& id, std::size_t topics, std::size_t sentences_per_topic,
                        std::uint64_t seed, std::size_t words_per_sentence) {
  Rng rng(seed);
  std::ostringstream text;
  for (std::size_t t = 0; t < topics; ++t) {
    text << "Section " << (t + 1) << " on " << topic_words(t).front() << ".\n";
    for (std::size_t s = 0; s < sentences_per_topic; ++s) {
      text << topic_sentence(t, rng, words_per_sentence) << (s + 1 == sentences_per_topic ? "\n\n" : " ");
    }
  }
  return Document{id, "Synthetic " + id, text.str()};
}

BlobCorpus make_blob_corpus(std::size_t n_chunks, std::size_t topics, std::size_t dim, Rng& rng,
                            double sigma, double min_gap) {
  BlobCorpus c;
  const Eigen::MatrixXd centers = spread_centers(topics, dim, min_gap, rng);
  const auto tok = default_tokenizer();
  for (std::size_t i = 0; i < n_chunks; ++i) {
    const std::size_t t = i % topics;
    Chunk chunk;
    chunk.doc_id = "blobs";
    chunk.index = i;
    chunk.id = "blobs#" + std::to_string(i);
    chunk.text = topic_sentence(t, rng);
    chunk.token_count = tok->count(chunk.text);
    EmbeddingVector v;
    for (std::size_t d = 0; d < dim; ++d) {
      v.values.push_back(centers(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) +
                         sigma * normal01(rng));
    }
    c.chunks.push_back(std::move(chunk));
    c.embeddings.texts.push_back(c.chunks.back().text);
    c.embeddings.vectors.push_back(std::move(v));
    c.topic_of_chunk.push_back(t);
  }
  c.subqs.question_id = "q";
  for (std::size_t t = 0; t < topics; ++t) {
    c.subqs.sub_questions.push_back("What about " + topic_words(t).front() + "?");
    EmbeddingVector v;
    for (std::size_t d = 0; d < dim; ++d) {
      v.values.push_back(centers(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)));
    }
    c.subqs.embeddings.push_back(std::move(v));
  }
  return c;
}

EmbeddingVector random_vector(std::size_t dim, Rng& rng) {
  EmbeddingVector v;
  for (std::size_t d = 0; d < dim; ++d) v.values.push_back(normal01(rng));
  return v;
}

SummaryTree random_tree(std::size_t leaves, std::size_t dim, Rng& rng, std::size_t max_tokens) {
  std::vector<SummaryNode> nodes;
  std::vector<std::string> below;
  for (std::size_t i = 0; i < leaves; ++i) {
    SummaryNode n;
    n.id = leaf_node_id(i);
    n.layer = 0;
    n.text = "leaf " + std::to_string(i);
    n.token_count = 1 + uniform_index(rng, max_tokens);
    n.embedding = random_vector(dim, rng);
    below.push_back(n.id);
    nodes.push_back(std::move(n));
  }
  for (int layer = 1; below.size() > 1; ++layer) {
    const std::size_t parents = std::max<std::size_t>(1, below.size() / 2);
    std::vector<std::vector<std::string>> kids(parents);
    // Every parent gets one child first, then the rest land at random.
    for (std::size_t i = 0; i < below.size(); ++i) {
      kids[i < parents ? i : uniform_index(rng, parents)].push_back(below[i]);
    }
    std::vector<std::string> next;
    for (std::size_t p = 0; p < parents; ++p) {
      SummaryNode n;
      n.id = summary_node_id(layer, p);
      n.layer = layer;
      n.text = "summary " + n.id;
      n.token_count = 1 + uniform_index(rng, max_tokens);
      n.embedding = random_vector(dim, rng);
      n.children = kids[p];
      next.push_back(n.id);
      nodes.push_back(std::move(n));
    }
    below = std::move(next);
  }
  return SummaryTree("rand", std::nullopt, std::move(nodes));
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / ("dtcrs-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace dtcrs::testing
