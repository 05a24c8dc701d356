#include "dtcrs/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dtcrs/error.hpp"
#include "dtcrs/random.hpp"

namespace dtcrs {

ReductionParams ReductionParams::from_config(const PipelineConfig& config, std::uint64_t seed) {
  ReductionParams p;
  p.n_neighbors = config.umap_n_neighbors;
  p.target_dim_cap = config.umap_dim;
  p.backend = config.reduction_backend;
  p.rng_seed = seed;
  return p;
}

std::size_t n_components_rule(std::size_t input_count, std::size_t cap) {
  if (input_count < 3) {
    throw ArgumentError("dimension rule needs at least 3 inputs, got " + std::to_string(input_count));
  }
  if (cap == 0) throw ArgumentError("dimension cap must be positive");
  return std::min(cap, input_count - 2);
}

Eigen::MatrixXd to_matrix(const std::vector<EmbeddingVector>& vectors) {
  if (vectors.empty()) return {};
  const std::size_t dim = vectors.front().dim();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim) throw ArgumentError("embeddings have mixed dimensions");
    for (std::size_t d = 0; d < dim; ++d) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = vectors[i].values[d];
  }
  return m;
}

Eigen::MatrixXd principal_axes_projection(const Eigen::MatrixXd& points, std::size_t n_components) {
  const Eigen::Index k = static_cast<Eigen::Index>(n_components);
  if (k > points.cols()) throw ArgumentError("more components requested than input dimensions");
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ContractError("eigendecomposition failed");
  // Eigen sorts eigenvalues ascending; the top axes are the last columns.
  Eigen::MatrixXd axes(points.cols(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(points.cols() - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
    }
    if (v(arg) < 0) v = -v;
    axes.col(c) = v;
  }
  return centered * axes;
}

namespace {

constexpr double kUmapA = 1.576943460405378;
constexpr double kUmapB = 0.8950608781227859;
constexpr double kSmoothTolerance = 1e-5;
constexpr double kMinKnnScale = 1e-3;
constexpr int kSmoothIterations = 64;
constexpr int kNegativeSampleRate = 5;
constexpr double kGradClip = 4.0;

double clip(double v) { return std::clamp(v, -kGradClip, kGradClip); }

Eigen::MatrixXd cosine_distances(const Eigen::MatrixXd& points) {
  Eigen::MatrixXd unit = points;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double n = unit.row(i).norm();
    if (n > 0) unit.row(i) /= n;
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Ones(points.rows(), points.rows()) - unit * unit.transpose();
  dist = dist.cwiseMax(0.0);
  dist.diagonal().setZero();
  return dist;
}

// Fuzzy simplicial set from exact nearest neighbours, symmetrized with the
// probabilistic t-conorm.
Eigen::MatrixXd fuzzy_graph(const Eigen::MatrixXd& dist, std::size_t n_neighbors) {
  const Eigen::Index n = dist.rows();
  const Eigen::Index k = std::min<Eigen::Index>(static_cast<Eigen::Index>(n_neighbors), n);
  const double target = std::log2(static_cast<double>(k));
  const double mean_all = dist.sum() / static_cast<double>(n * n);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    // The point itself always sorts first.
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (a == i || b == i) return a == i && b != i;
      return dist(i, a) < dist(i, b);
    });
    std::vector<Eigen::Index> nbrs(order.begin() + 1, order.begin() + k);
    double rho = 0.0;
    double sum = 0.0;
    for (auto j : nbrs) {
      sum += dist(i, j);
      if (rho == 0.0 && dist(i, j) > 0.0) rho = dist(i, j);
    }
    const double mean_i = nbrs.empty() ? 0.0 : sum / static_cast<double>(k);

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int it = 0; it < kSmoothIterations; ++it) {
      double psum = 0.0;
      for (auto j : nbrs) {
        const double d = dist(i, j) - rho;
        psum += d > 0 ? std::exp(-d / mid) : 1.0;
      }
      if (std::abs(psum - target) < kSmoothTolerance) break;
      if (psum > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    double sigma = mid;
    if (rho > 0.0) {
      sigma = std::max(sigma, kMinKnnScale * mean_i);
    } else {
      sigma = std::max(sigma, kMinKnnScale * mean_all);
    }
    for (auto j : nbrs) {
      const double d = dist(i, j) - rho;
      w(i, j) = (d <= 0.0 || sigma <= 0.0) ? 1.0 : std::exp(-d / sigma);
    }
  }
  const Eigen::MatrixXd wt = w.transpose();
  return w + wt - w.cwiseProduct(wt);
}

Eigen::MatrixXd random_init(Eigen::Index n, Eigen::Index dim, Rng& rng) {
  Eigen::MatrixXd y(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < dim; ++d) y(i, d) = uniform01(rng) * 20.0 - 10.0;
  return y;
}

Eigen::MatrixXd spectral_init(const Eigen::MatrixXd& graph, Eigen::Index dim, Rng& rng) {
  const Eigen::Index n = graph.rows();
  if (dim + 1 > n) return random_init(n, dim, rng);
  const Eigen::VectorXd degree = graph.rowwise().sum();
  if ((degree.array() <= 0.0).any()) return random_init(n, dim, rng);
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  const Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) -
                              inv_sqrt.asDiagonal() * graph * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) return random_init(n, dim, rng);
  Eigen::MatrixXd y = solver.eigenvectors().middleCols(1, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (std::abs(y(i, c)) > std::abs(y(arg, c)) + 1e-12) arg = i;
    }
    if (y(arg, c) < 0) y.col(c) = -y.col(c);
  }
  const double max_abs = y.cwiseAbs().maxCoeff();
  if (!(max_abs > 0.0) || !std::isfinite(max_abs)) return random_init(n, dim, rng);
  y *= 10.0 / max_abs;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < dim; ++d) y(i, d) += 1e-4 * normal01(rng);
  return y;
}

void rescale_columns(Eigen::MatrixXd& y) {
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double lo = y.col(c).minCoeff();
    const double hi = y.col(c).maxCoeff();
    if (hi > lo) y.col(c) = ((y.col(c).array() - lo) * (10.0 / (hi - lo))).matrix();
  }
}

struct Edge {
  Eigen::Index head;
  Eigen::Index tail;
  double epochs_per_sample;
};

void optimize_layout(Eigen::MatrixXd& y, const std::vector<Edge>& edges, int n_epochs, Rng& rng) {
  const Eigen::Index n = y.rows();
  const Eigen::Index dim = y.cols();
  std::vector<double> next_sample(edges.size());
  std::vector<double> per_negative(edges.size());
  std::vector<double> next_negative(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    next_sample[e] = edges[e].epochs_per_sample;
    per_negative[e] = edges[e].epochs_per_sample / kNegativeSampleRate;
    next_negative[e] = per_negative[e];
  }
  for (int epoch = 0; epoch < n_epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / n_epochs;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (next_sample[e] > epoch) continue;
      const Eigen::Index j = edges[e].head;
      const Eigen::Index k = edges[e].tail;
      double d2 = (y.row(j) - y.row(k)).squaredNorm();
      double coeff = 0.0;
      if (d2 > 0.0) {
        coeff = -2.0 * kUmapA * kUmapB * std::pow(d2, kUmapB - 1.0) / (kUmapA * std::pow(d2, kUmapB) + 1.0);
      }
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double g = clip(coeff * (y(j, d) - y(k, d)));
        y(j, d) += g * alpha;
        y(k, d) -= g * alpha;
      }
      next_sample[e] += edges[e].epochs_per_sample;

      const int n_neg = static_cast<int>((epoch - next_negative[e]) / per_negative[e]);
      for (int p = 0; p < n_neg; ++p) {
        const auto other = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
        if (other == j) continue;
        d2 = (y.row(j) - y.row(other)).squaredNorm();
        coeff = 0.0;
        if (d2 > 0.0) {
          coeff = 2.0 * kUmapB / ((0.001 + d2) * (kUmapA * std::pow(d2, kUmapB) + 1.0));
        }
        for (Eigen::Index d = 0; d < dim; ++d) {
          const double g = coeff > 0.0 ? clip(coeff * (y(j, d) - y(other, d))) : kGradClip;
          y(j, d) += g * alpha;
        }
      }
      next_negative[e] += n_neg * per_negative[e];
    }
  }
}

}  // namespace

Eigen::MatrixXd umap_embedding(const Eigen::MatrixXd& points, std::size_t n_components,
                               std::size_t n_neighbors, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  const auto dim = static_cast<Eigen::Index>(n_components);
  if (n < 3) throw ArgumentError("manifold reduction needs at least 3 points");
  if (n_neighbors < 2) throw ArgumentError("n_neighbors must be at least 2");
  Rng rng(splitmix64(seed));

  const Eigen::MatrixXd graph = fuzzy_graph(cosine_distances(points), n_neighbors);
  const int n_epochs = n <= 10000 ? 500 : 200;
  const double max_w = graph.maxCoeff();

  std::vector<Edge> edges;
  if (max_w > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = graph(i, j);
        if (i == j || w <= 0.0 || w < max_w / n_epochs) continue;
        edges.push_back({i, j, max_w / w});
      }
    }
  }

  Eigen::MatrixXd y = spectral_init(graph, dim, rng);
  rescale_columns(y);
  optimize_layout(y, edges, n_epochs, rng);
  if (!y.allFinite()) throw ContractError("manifold reduction produced non-finite coordinates");
  return y;
}

ReducedBatch reduce(const Eigen::MatrixXd& points, const ReductionParams& params) {
  ReducedBatch out;
  out.split_index = static_cast<std::size_t>(points.rows());
  if (points.rows() < 3) {
    out.vectors = points;
    out.n_components = static_cast<std::size_t>(points.cols());
    out.skipped = true;
    return out;
  }
  if (!points.allFinite()) throw ArgumentError("reduction input contains non-finite values");
  std::size_t k = n_components_rule(static_cast<std::size_t>(points.rows()), params.target_dim_cap);
  k = std::min(k, static_cast<std::size_t>(points.cols()));
  out.n_components = k;
  if (params.backend == ReductionBackend::kLinear) {
    out.vectors = principal_axes_projection(points, k);
  } else {
    out.vectors = umap_embedding(points, k, params.n_neighbors, params.rng_seed);
  }
  return out;
}

ReducedBatch reduce_joint(const EmbeddingBatch& chunks, const EmbeddingBatch& subqs,
                          const ReductionParams& params) {
  const std::size_t dim = chunks.size() > 0 ? chunks.dim() : subqs.dim();
  for (const auto* batch : {&chunks, &subqs}) {
    for (const auto& v : batch->vectors) {
      if (v.dim() != dim) throw ContractError("joint reduction inputs differ in dimension");
    }
  }
  std::vector<EmbeddingVector> all = chunks.vectors;
  all.insert(all.end(), subqs.vectors.begin(), subqs.vectors.end());
  if (all.empty()) throw ArgumentError("nothing to reduce");
  ReducedBatch out = reduce(to_matrix(all), params);
  out.split_index = chunks.size();
  return out;
}

}  // namespace dtcrs
