#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dtcrs/config.hpp"
#include "dtcrs/embedding.hpp"

namespace dtcrs {

struct ReductionParams {
  std::size_t n_neighbors = 10;
  /// Upper bound on output dimensions ("dim").
  std::size_t target_dim_cap = 10;
  ReductionBackend backend = ReductionBackend::kManifold;
  std::uint64_t rng_seed = 0;

  static ReductionParams from_config(const PipelineConfig& config, std::uint64_t seed);
};

/// Rows of `vectors` correspond 1:1, in order, to the input rows. In a joint
/// reduction rows [0, split_index) are chunks and the rest sub-questions.
struct ReducedBatch {
  Eigen::MatrixXd vectors;
  std::size_t n_components = 0;
  std::size_t split_index = 0;
  /// Fewer than 3 rows: nothing was fitted and `vectors` are the inputs.
  bool skipped = false;
};

/// min(cap, input_count - 2). Throws ArgumentError below 3 inputs, where
/// the rule is undefined.
std::size_t n_components_rule(std::size_t input_count, std::size_t cap);

/// Reduces all rows in a single fit. Output width is n_components_rule(rows,
/// cap), clamped to the input width for very narrow inputs.
ReducedBatch reduce(const Eigen::MatrixXd& points, const ReductionParams& params);

/// Stacks chunk rows over sub-question rows and reduces them together so
/// both live in one space.
ReducedBatch reduce_joint(const EmbeddingBatch& chunks, const EmbeddingBatch& subqs,
                          const ReductionParams& params);

Eigen::MatrixXd to_matrix(const std::vector<EmbeddingVector>& vectors);

/// Centered projection onto the top `n_components` principal axes. Each
/// axis is sign-normalized so its largest-magnitude loading is positive.
Eigen::MatrixXd principal_axes_projection(const Eigen::MatrixXd& points, std::size_t n_components);

/// UMAP with cosine input metric, min_dist 0.1, spread 1.0, spectral
/// initialization and negative-sampling SGD.
Eigen::MatrixXd umap_embedding(const Eigen::MatrixXd& points, std::size_t n_components,
                               std::size_t n_neighbors, std::uint64_t seed);

}  // namespace dtcrs
