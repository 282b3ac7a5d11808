#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "quadrat/aggregator.hpp"

namespace quadrat {

using ClusterId = std::uint32_t;

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // stop once no centroid moves farther than this
};

struct ClusterModel {
  std::size_t k = 0;
  Eigen::MatrixXd centroids;          // k x m
  std::vector<ClusterId> assignments;  // one per input row
  std::vector<double> inertia_history;  // inertia after every assignment step
  int iterations = 0;

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

/// k-means++ seeding followed by Lloyd iterations. An empty cluster is re-seeded at the
/// point farthest from its assigned centroid. Throws InputError when rows < k or k == 0.
ClusterModel kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Region -> the cluster holding most of its images (ties to the lower cluster id).
using RegionClusterMap = std::map<std::string, ClusterId>;

RegionClusterMap dominant_cluster(std::span<const ClusterId> assignments,
                                  std::span<const std::string> regions);

/// Per-cluster empirical species distributions P(y | c).
struct ClusterPriors {
  std::vector<std::vector<double>> priors;  // [cluster][species]

  std::size_t cluster_count() const noexcept { return priors.size(); }
  std::size_t species_count() const noexcept { return priors.empty() ? 0 : priors.front().size(); }
};

/// Mean of the image vectors in each cluster, plus `epsilon`, renormalised. Clusters without
/// images get a uniform prior. Every image vector must have `species_count` entries (else
/// InputError) and sum to 1 within 1e-6 (else InvariantError).
ClusterPriors estimate_priors(std::span<const std::vector<double>> image_probs,
                              std::span<const ClusterId> assignments, std::size_t cluster_count,
                              double epsilon, std::size_t species_count);

/// p'(y) proportional to p(y) * prior(y) over the tile's support, renormalised. The result is
/// ordered by probability descending with the input order kept among equal values.
SparseProbs reweight(const SparseProbs& tile_probs, std::span<const double> prior);

/// Agreement between two labelings, corrected for chance (1 = identical partitions).
double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

}  // namespace quadrat
