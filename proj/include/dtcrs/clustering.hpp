#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dtcrs/random.hpp"

namespace dtcrs {

/// Full-covariance Gaussian mixture.
struct GmmModel {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  std::size_t components() const { return means.size(); }
  std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }
};

struct EmOptions {
  int max_iterations = 200;
  /// Stop when the mean per-sample log-likelihood moves less than this.
  double tolerance = 1e-6;
  /// Eigenvalue floor applied to a covariance only when it drops below it.
  double covariance_floor = 1e-6;
};

struct EmFitResult {
  GmmModel model;
  /// Total log-likelihood of the data under the parameters in effect at
  /// each E-step, including the final model.
  std::vector<double> log_likelihood_trace;
  Eigen::MatrixXd responsibilities;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Some covariance needed its eigenvalues floored.
  bool regularized = false;
};

/// Means at the given seed rows, uniform weights, and every covariance the
/// diagonal of per-dimension variances of the points around their nearest
/// seed (pooled over all points, floored at 1e-6).
GmmModel seeded_init(const Eigen::MatrixXd& points, const Eigen::MatrixXd& seeds);

/// k-means++ chosen means with the same covariance and weight rule.
GmmModel kmeanspp_init(const Eigen::MatrixXd& points, std::size_t components, Rng& rng);

/// Posterior p(m | x_i) per row, computed in log space.
Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& points);
double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& points);

EmFitResult em_fit(const Eigen::MatrixXd& points, GmmModel init, const EmOptions& options = {});

struct SoftAssignment {
  /// Member row indices per component, ascending. May contain empty lists.
  std::vector<std::vector<std::size_t>> clusters;
  /// Component ids per row, ascending. Never empty.
  std::vector<std::vector<std::size_t>> memberships;
  /// Rows that had no component at or above the threshold.
  std::size_t argmax_fallbacks = 0;
};

/// Row i joins every component with posterior >= threshold; a row with none
/// joins its argmax (lowest id on ties).
SoftAssignment soft_assign(const Eigen::MatrixXd& responsibilities, double threshold);

/// Free parameters of a full-covariance mixture:
/// (M - 1) + M*D + M*D*(D + 1)/2.
std::size_t gmm_parameter_count(std::size_t components, std::size_t dim);

/// ln(n) * p - 2 * lnL.
double bic(double log_likelihood, std::size_t components, std::size_t dim, std::size_t samples);

/// Largest candidate count worth trying: at least D + 1 rows per component,
/// fewer components than rows, and no more than `max_components`.
std::size_t bic_component_cap(std::size_t samples, std::size_t dim, std::size_t max_components);

struct BicSelection {
  std::size_t chosen = 1;
  /// (M, BIC) for every candidate tried.
  std::vector<std::pair<std::size_t, double>> scores;
  EmFitResult fit;
};

/// Fits M = 1..max_components (1 <= max_components <= rows) from k-means++
/// starts and keeps the lowest BIC, preferring fewer components on ties.
/// Candidates with M > 1 where some component holds fewer than D + 1
/// effective points are scored but never chosen.
BicSelection select_clusters_bic(const Eigen::MatrixXd& points, std::size_t max_components,
                                 std::uint64_t seed, const EmOptions& options = {});

struct HierarchicalOptions {
  std::size_t cluster_cap = 10;
  std::size_t max_components = 50;
  double threshold = 0.5;
  /// Dimension cap for the local re-projection of an oversized cluster.
  std::size_t local_dim_cap = 10;
  std::uint64_t seed = 0;
};

/// Splits every cluster larger than the cap: its members are re-projected
/// onto their own principal axes and clustered again (BIC-selected, at least
/// ceil(size / cap) components when BIC picks one), recursively. Clusters
/// within the cap pass through unchanged.
std::vector<std::vector<std::size_t>> refine_clusters(const Eigen::MatrixXd& points,
                                                      const std::vector<std::vector<std::size_t>>& clusters,
                                                      const HierarchicalOptions& options,
                                                      const EmOptions& em = {});

/// Global BIC mixture, then every cluster larger than the cap is
/// re-projected onto its own principal axes and split again until all fit.
std::vector<std::vector<std::size_t>> hierarchical_cluster(const Eigen::MatrixXd& points,
                                                           const HierarchicalOptions& options,
                                                           const EmOptions& em = {});

}  // namespace dtcrs
