#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dtcrs/embedding.hpp"
#include "dtcrs/random.hpp"
#include "dtcrs/types.hpp"

namespace dtcrs::testing {

struct Blobs {
  Eigen::MatrixXd points;
  Eigen::MatrixXd centers;
  std::vector<std::size_t> labels;
};

/// `per_blob` isotropic Gaussian points around each center, blob by blob.
Blobs make_blobs(const Eigen::MatrixXd& centers, std::size_t per_blob, double sigma, Rng& rng);

/// `count` centers in `dim` dimensions, pairwise at least `min_gap` apart.
Eigen::MatrixXd spread_centers(std::size_t count, std::size_t dim, double min_gap, Rng& rng);

/// Vocabulary of one synthetic topic: distinct lowercase pseudo-words.
std::vector<std::string> topic_words(std::size_t topic, std::size_t count = 12);

/// One sentence drawn from a topic's vocabulary.
std::string topic_sentence(std::size_t topic, Rng& rng, std::size_t words = 10);

/// Document whose sentences cycle through topics in contiguous sections.
/// Each section is introduced by a heading line.
Document topic_document(const std::string& id, std::size_t topics, std::size_t sentences_per_topic,
                        std::uint64_t seed, std::size_t words_per_sentence = 10);

/// Chunks whose embeddings are Gaussian blobs, one blob per topic, with a
/// sub-question embedded at each blob centroid.
struct BlobCorpus {
  std::vector<Chunk> chunks;
  EmbeddingBatch embeddings;
  SubQuestionSet subqs;
  std::vector<std::size_t> topic_of_chunk;
};

/// Chunks are assigned to topics round-robin, so every topic gets at least
/// one chunk when `n_chunks >= topics`.
BlobCorpus make_blob_corpus(std::size_t n_chunks, std::size_t topics, std::size_t dim, Rng& rng,
                            double sigma = 0.25, double min_gap = 3.0);

/// Valid random tree: `leaves` leaves, each upper layer roughly half the one
/// below, children partitioned among parents. Token counts lie in [1, max_tokens].
SummaryTree random_tree(std::size_t leaves, std::size_t dim, Rng& rng, std::size_t max_tokens = 200);

/// Random vector with standard normal entries.
EmbeddingVector random_vector(std::size_t dim, Rng& rng);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace dtcrs::testing
