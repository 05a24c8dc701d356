#include "dtcrs/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dtcrs/error.hpp"
#include "dtcrs/reduction.hpp"

namespace dtcrs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxSplitDepth = 8;

// Symmetrizes `cov` and floors its eigenvalues if any fall below `floor`.
bool condition_covariance(Eigen::MatrixXd& cov, double floor) {
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    cov = Eigen::MatrixXd::Identity(cov.rows(), cov.cols()) * floor;
    return true;
  }
  if (solver.eigenvalues().minCoeff() >= floor) return false;
  const Eigen::VectorXd clamped = solver.eigenvalues().cwiseMax(floor);
  cov = solver.eigenvectors() * clamped.asDiagonal() * solver.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose());
  return true;
}

// n x M matrix of log(w_m) + log N(x_i | mu_m, Sigma_m).
Eigen::MatrixXd weighted_log_density(const GmmModel& model, const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const auto m_count = static_cast<Eigen::Index>(model.components());
  Eigen::MatrixXd out(n, m_count);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const double w = model.weights(m);
    if (!(w > 0.0)) {
      out.col(m).setConstant(kNegInf);
      continue;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(model.covariances[static_cast<std::size_t>(m)]);
    if (llt.info() != Eigen::Success) throw ContractError("covariance is not positive definite");
    const Eigen::MatrixXd& l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const Eigen::MatrixXd diff =
        (points.rowwise() - model.means[static_cast<std::size_t>(m)].transpose()).transpose();
    const Eigen::MatrixXd solved = llt.matrixL().solve(diff);
    const Eigen::VectorXd mahal = solved.colwise().squaredNorm().transpose();
    out.col(m) = (std::log(w) - 0.5 * (static_cast<double>(d) * log_2pi + log_det)) -
                 0.5 * mahal.array();
  }
  return out;
}

// Row-wise log-sum-exp.
Eigen::VectorXd row_lse(const Eigen::MatrixXd& lp) {
  Eigen::VectorXd out(lp.rows());
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    const double mx = lp.row(i).maxCoeff();
    if (!std::isfinite(mx)) {
      out(i) = mx;
      continue;
    }
    out(i) = mx + std::log((lp.row(i).array() - mx).exp().sum());
  }
  return out;
}

void check_points(const Eigen::MatrixXd& points) {
  if (points.rows() == 0 || points.cols() == 0) throw ArgumentError("no points to cluster");
  if (!points.allFinite()) throw ArgumentError("points contain non-finite values");
}

}  // namespace

GmmModel seeded_init(const Eigen::MatrixXd& points, const Eigen::MatrixXd& seeds) {
  check_points(points);
  if (seeds.rows() == 0) throw ArgumentError("no seed rows");
  if (seeds.cols() != points.cols()) throw ArgumentError("seed rows and points differ in width");
  GmmModel model;
  // Pooled per-dimension variance of each point around its nearest seed.
  Eigen::MatrixXd residual(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index nearest = 0;
    (seeds.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&nearest);
    residual.row(i) = points.row(i) - seeds.row(nearest);
  }
  const Eigen::RowVectorXd var = residual.array().square().colwise().sum() / static_cast<double>(points.rows());
  const Eigen::MatrixXd cov = var.transpose().cwiseMax(1e-6).asDiagonal();
  const auto m = static_cast<std::size_t>(seeds.rows());
  model.weights = Eigen::VectorXd::Constant(seeds.rows(), 1.0 / static_cast<double>(m));
  for (Eigen::Index r = 0; r < seeds.rows(); ++r) {
    model.means.emplace_back(seeds.row(r).transpose());
    model.covariances.push_back(cov);
  }
  return model;
}

GmmModel kmeanspp_init(const Eigen::MatrixXd& points, std::size_t components, Rng& rng) {
  check_points(points);
  const auto n = static_cast<std::size_t>(points.rows());
  if (components == 0 || components > n) throw ArgumentError("component count out of range");
  std::vector<std::size_t> chosen{uniform_index(rng, n)};
  Eigen::VectorXd best = (points.rowwise() - points.row(static_cast<Eigen::Index>(chosen[0])))
                             .rowwise()
                             .squaredNorm();
  while (chosen.size() < components) {
    const double total = best.sum();
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best(static_cast<Eigen::Index>(i));
        if (acc > r && best(static_cast<Eigen::Index>(i)) > 0.0) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) {
      // All remaining mass is zero (duplicates): take the first unused row.
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
    const Eigen::VectorXd d =
        (points.rowwise() - points.row(static_cast<Eigen::Index>(pick))).rowwise().squaredNorm();
    best = best.cwiseMin(d);
  }
  Eigen::MatrixXd seeds(static_cast<Eigen::Index>(components), points.cols());
  for (std::size_t c = 0; c < components; ++c) {
    seeds.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen[c]));
  }
  return seeded_init(points, seeds);
}

Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& points) {
  if (static_cast<Eigen::Index>(model.dim()) != points.cols()) {
    throw ArgumentError("points and mixture differ in dimension");
  }
  const Eigen::MatrixXd lp = weighted_log_density(model, points);
  const Eigen::VectorXd lse = row_lse(lp);
  return (lp.colwise() - lse).array().exp().matrix();
}

double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& points) {
  return row_lse(weighted_log_density(model, points)).sum();
}

EmFitResult em_fit(const Eigen::MatrixXd& points, GmmModel init, const EmOptions& options) {
  check_points(points);
  if (init.components() == 0) throw ArgumentError("mixture has no components");
  if (static_cast<Eigen::Index>(init.dim()) != points.cols()) {
    throw ArgumentError("mixture and points differ in width");
  }
  const Eigen::Index n = points.rows();
  const auto m_count = static_cast<Eigen::Index>(init.components());
  if (m_count > n) throw ArgumentError("more mixture components than points");

  EmFitResult result;
  result.model = std::move(init);
  for (auto& cov : result.model.covariances) {
    result.regularized |= condition_covariance(cov, options.covariance_floor);
  }

  for (;;) {
    const Eigen::MatrixXd lp = weighted_log_density(result.model, points);
    const Eigen::VectorXd lse = row_lse(lp);
    const double ll = lse.sum();
    if (!std::isfinite(ll)) throw ContractError("mixture log-likelihood is not finite");
    result.responsibilities = (lp.colwise() - lse).array().exp().matrix();
    result.log_likelihood_trace.push_back(ll);
    result.log_likelihood = ll;
    const std::size_t t = result.log_likelihood_trace.size();
    if (t > 1 &&
        std::abs(ll - result.log_likelihood_trace[t - 2]) / static_cast<double>(n) < options.tolerance) {
      result.converged = true;
      break;
    }
    if (result.iterations >= options.max_iterations) break;

    const Eigen::VectorXd nk = result.responsibilities.colwise().sum().transpose();
    for (Eigen::Index m = 0; m < m_count; ++m) {
      const auto mi = static_cast<std::size_t>(m);
      if (nk(m) < 1e-10) {
        result.model.weights(m) = 0.0;
        continue;
      }
      const Eigen::VectorXd r = result.responsibilities.col(m);
      const Eigen::VectorXd mean = (points.transpose() * r) / nk(m);
      const Eigen::MatrixXd centered = points.rowwise() - mean.transpose();
      Eigen::MatrixXd cov = (centered.transpose() * r.asDiagonal() * centered) / nk(m);
      result.regularized |= condition_covariance(cov, options.covariance_floor);
      result.model.means[mi] = mean;
      result.model.covariances[mi] = cov;
      result.model.weights(m) = nk(m) / static_cast<double>(n);
    }
    const double wsum = result.model.weights.sum();
    if (!(wsum > 0.0)) throw ContractError("all mixture weights vanished");
    result.model.weights /= wsum;
    ++result.iterations;
  }
  return result;
}

SoftAssignment soft_assign(const Eigen::MatrixXd& resp, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must be in (0, 1]");
  SoftAssignment out;
  const auto m_count = static_cast<std::size_t>(resp.cols());
  out.clusters.resize(m_count);
  out.memberships.resize(static_cast<std::size_t>(resp.rows()));
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    auto& mine = out.memberships[static_cast<std::size_t>(i)];
    for (Eigen::Index m = 0; m < resp.cols(); ++m) {
      if (resp(i, m) >= threshold) mine.push_back(static_cast<std::size_t>(m));
    }
    if (mine.empty()) {
      Eigen::Index arg = 0;
      for (Eigen::Index m = 1; m < resp.cols(); ++m) {
        if (resp(i, m) > resp(i, arg)) arg = m;
      }
      mine.push_back(static_cast<std::size_t>(arg));
      ++out.argmax_fallbacks;
    }
    for (auto m : mine) out.clusters[m].push_back(static_cast<std::size_t>(i));
  }
  return out;
}

std::size_t gmm_parameter_count(std::size_t components, std::size_t dim) {
  return (components - 1) + components * dim + components * dim * (dim + 1) / 2;
}

double bic(double log_likelihood, std::size_t components, std::size_t dim, std::size_t samples) {
  if (samples == 0) throw ArgumentError("BIC needs at least one sample");
  if (components == 0) throw ArgumentError("BIC needs at least one component");
  return std::log(static_cast<double>(samples)) *
             static_cast<double>(gmm_parameter_count(components, dim)) -
         2.0 * log_likelihood;
}

std::size_t bic_component_cap(std::size_t samples, std::size_t dim, std::size_t max_components) {
  std::size_t cap = std::max<std::size_t>(1, samples / (dim + 1));
  cap = std::min(cap, std::max<std::size_t>(1, max_components));
  if (samples >= 2) cap = std::min(cap, samples - 1);
  return cap;
}

BicSelection select_clusters_bic(const Eigen::MatrixXd& points, std::size_t max_components,
                                 std::uint64_t seed, const EmOptions& options) {
  check_points(points);
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  if (max_components == 0) throw ArgumentError("empty component range");
  if (max_components > n) throw ArgumentError("component range exceeds the point count");
  const std::size_t upper = max_components;
  BicSelection out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m <= upper; ++m) {
    Rng rng(derive_seed(seed, "bic:" + std::to_string(m)));
    EmFitResult fit = em_fit(points, kmeanspp_init(points, m, rng), options);
    const double score = bic(fit.log_likelihood, m, d, n);
    out.scores.emplace_back(m, score);
    // A component backed by fewer than D + 1 effective points has a
    // degenerate covariance whose likelihood grows without bound.
    const double smallest = fit.responsibilities.colwise().sum().minCoeff();
    if (m > 1 && smallest < static_cast<double>(d + 1)) continue;
    if (score < best) {
      best = score;
      out.chosen = m;
      out.fit = std::move(fit);
    }
  }
  return out;
}

namespace {

void sequential_split(const std::vector<std::size_t>& ids, std::size_t cap,
                      std::vector<std::vector<std::size_t>>& out) {
  for (std::size_t start = 0; start < ids.size(); start += cap) {
    const std::size_t end = std::min(ids.size(), start + cap);
    out.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                     ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& points, const std::vector<std::size_t>& ids) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), points.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(ids[i]));
  }
  return out;
}

// Partitions `ids` (rows of `points`) into groups no larger than the cap.
void split_oversized(const Eigen::MatrixXd& points, const std::vector<std::size_t>& ids, int depth,
                     const HierarchicalOptions& opt, const EmOptions& em,
                     std::vector<std::vector<std::size_t>>& out) {
  const std::size_t n = ids.size();
  if (n <= opt.cluster_cap) {
    out.push_back(ids);
    return;
  }
  if (depth >= kMaxSplitDepth || n < 3) {
    sequential_split(ids, opt.cluster_cap, out);
    return;
  }
  Eigen::MatrixXd local = gather_rows(points, ids);
  const std::size_t k = std::min(n_components_rule(n, opt.local_dim_cap), static_cast<std::size_t>(local.cols()));
  local = principal_axes_projection(local, k);

  std::string label = "split:" + std::to_string(depth) + ":" + std::to_string(ids.front()) + ":" + std::to_string(n);
  const std::uint64_t seed = derive_seed(opt.seed, label);
  const std::size_t cap = bic_component_cap(n, k, opt.max_components);
  BicSelection sel = select_clusters_bic(local, cap, seed, em);
  EmFitResult fit = std::move(sel.fit);
  if (sel.chosen == 1) {
    const std::size_t forced = std::min(n - 1, (n + opt.cluster_cap - 1) / opt.cluster_cap);
    Rng rng(derive_seed(seed, "forced"));
    fit = em_fit(local, kmeanspp_init(local, forced, rng), em);
  }
  const SoftAssignment assign = soft_assign(fit.responsibilities, opt.threshold);
  for (const auto& members : assign.clusters) {
    if (members.empty()) continue;
    if (members.size() == n) {
      sequential_split(ids, opt.cluster_cap, out);
      return;
    }
  }
  for (const auto& members : assign.clusters) {
    if (members.empty()) continue;
    std::vector<std::size_t> sub;
    sub.reserve(members.size());
    for (auto m : members) sub.push_back(ids[m]);
    split_oversized(points, sub, depth + 1, opt, em, out);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> refine_clusters(const Eigen::MatrixXd& points,
                                                      const std::vector<std::vector<std::size_t>>& clusters,
                                                      const HierarchicalOptions& options,
                                                      const EmOptions& em) {
  check_points(points);
  if (options.cluster_cap == 0) throw ArgumentError("cluster cap must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (const auto& members : clusters) {
    if (members.empty()) continue;
    split_oversized(points, members, 0, options, em, out);
  }
  return out;
}

std::vector<std::vector<std::size_t>> hierarchical_cluster(const Eigen::MatrixXd& points,
                                                           const HierarchicalOptions& options,
                                                           const EmOptions& em) {
  check_points(points);
  if (options.cluster_cap == 0) throw ArgumentError("cluster cap must be positive");
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 1) return {{0}};
  const std::size_t cap = bic_component_cap(n, static_cast<std::size_t>(points.cols()), options.max_components);
  const BicSelection global = select_clusters_bic(points, cap, derive_seed(options.seed, "global"), em);
  const SoftAssignment assign = soft_assign(global.fit.responsibilities, options.threshold);
  return refine_clusters(points, assign.clusters, options, em);
}

}  // namespace dtcrs
