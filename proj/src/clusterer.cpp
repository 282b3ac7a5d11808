#include "quadrat/clusterer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

constexpr double kPriorSumTolerance = 1e-6;

// Returns the inertia; ties go to the lower cluster id.
double assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
              std::vector<ClusterId>& assignments, std::vector<double>& dist2) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    ClusterId arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<ClusterId>(c);
      }
    }
    assignments[static_cast<std::size_t>(i)] = arg;
    dist2[static_cast<std::size_t>(i)] = best;
    inertia += best;
  }
  return inertia;
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, std::size_t k,
                                std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), points.cols());
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  chosen[pick] = true;
  centroids.row(0) = points.row(static_cast<Eigen::Index>(pick));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points.row(static_cast<Eigen::Index>(i)) - centroids.row(0)).squaredNorm();

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double run = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        run += d2[i];
        pick = i;
        if (run > target) break;
      }
    } else {
      // Every remaining point coincides with a seed: fall back to an unused index.
      std::vector<std::size_t> unused;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) unused.push_back(i);
      }
      pick = unused[std::uniform_int_distribution<std::size_t>(0, unused.size() - 1)(rng)];
    }
    chosen[pick] = true;
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) -
                               centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw InputError("kmeans: k must be >= 1");
  if (n < k) {
    throw InputError("kmeans: " + std::to_string(n) + " points cannot form " + std::to_string(k) +
                     " clusters");
  }
  if (!points.allFinite()) throw InputError("kmeans: non-finite input");

  std::mt19937_64 rng(seed);
  ClusterModel model;
  model.k = k;
  model.centroids = plus_plus_seeds(points, k, rng);
  model.assignments.assign(n, 0);
  std::vector<double> dist2(n, 0.0);

  for (int it = 0; it < options.max_iterations; ++it) {
    const double inertia = assign(points, model.centroids, model.assignments, dist2);
    if (!model.inertia_history.empty() &&
        inertia > model.inertia_history.back() * (1.0 + 1e-9) + 1e-300) {
      throw InvariantError("kmeans: inertia increased between Lloyd iterations");
    }
    model.inertia_history.push_back(inertia);
    model.iterations = it + 1;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(model.assignments[i]) += points.row(static_cast<Eigen::Index>(i));
      ++counts[model.assignments[i]];
    }
    Eigen::MatrixXd next = model.centroids;
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist2[i] > far_d) {
          far_d = dist2[i];
          far = i;
        }
      }
      taken[far] = true;
      next.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
    }
    const double shift = (next - model.centroids).rowwise().norm().maxCoeff();
    model.centroids = std::move(next);
    if (shift < options.tolerance) break;
  }
  // Final assignment so labels agree with the returned centroids.
  const double inertia = assign(points, model.centroids, model.assignments, dist2);
  if (!model.inertia_history.empty() &&
      inertia > model.inertia_history.back() * (1.0 + 1e-9) + 1e-300) {
    throw InvariantError("kmeans: inertia increased between Lloyd iterations");
  }
  model.inertia_history.push_back(inertia);
  return model;
}

RegionClusterMap dominant_cluster(std::span<const ClusterId> assignments,
                                  std::span<const std::string> regions) {
  if (assignments.size() != regions.size()) {
    throw InputError("dominant_cluster: region labels are not aligned with assignments");
  }
  std::map<std::string, std::map<ClusterId, std::size_t>> counts;
  for (std::size_t i = 0; i < regions.size(); ++i) ++counts[regions[i]][assignments[i]];
  RegionClusterMap out;
  for (const auto& [region, per_cluster] : counts) {
    ClusterId best = 0;
    std::size_t best_count = 0;
    for (const auto& [cluster, count] : per_cluster) {
      if (count > best_count) {
        best = cluster;
        best_count = count;
      }
    }
    out.emplace(region, best);
  }
  return out;
}

ClusterPriors estimate_priors(std::span<const std::vector<double>> image_probs,
                              std::span<const ClusterId> assignments, std::size_t cluster_count,
                              double epsilon, std::size_t species_count) {
  if (image_probs.size() != assignments.size()) {
    throw InputError("estimate_priors: " + std::to_string(image_probs.size()) +
                     " image vectors but " + std::to_string(assignments.size()) + " assignments");
  }
  if (species_count == 0) throw InputError("estimate_priors: empty label space");
  if (!(epsilon >= 0.0)) throw InputError("estimate_priors: epsilon must be >= 0");
  ClusterPriors out;
  out.priors.assign(cluster_count, std::vector<double>(species_count, 0.0));
  std::vector<std::size_t> counts(cluster_count, 0);
  for (std::size_t i = 0; i < image_probs.size(); ++i) {
    const auto& p = image_probs[i];
    if (p.size() != species_count) {
      throw InputError("estimate_priors: image vector " + std::to_string(i) + " has " +
                       std::to_string(p.size()) + " entries, expected " +
                       std::to_string(species_count));
    }
    if (assignments[i] >= cluster_count) {
      throw InputError("estimate_priors: cluster id " + std::to_string(assignments[i]) +
                       " out of range");
    }
    double sum = 0.0;
    for (double v : p) sum += v;
    if (std::abs(sum - 1.0) > kPriorSumTolerance) {
      throw InvariantError("estimate_priors: image vector " + std::to_string(i) +
                           " does not sum to 1");
    }
    auto& acc = out.priors[assignments[i]];
    for (std::size_t s = 0; s < species_count; ++s) acc[s] += p[s];
    ++counts[assignments[i]];
  }
  for (std::size_t c = 0; c < cluster_count; ++c) {
    auto& prior = out.priors[c];
    if (counts[c] == 0) {
      std::fill(prior.begin(), prior.end(), 1.0 / static_cast<double>(species_count));
      continue;
    }
    double total = 0.0;
    for (auto& v : prior) {
      v = v / static_cast<double>(counts[c]) + epsilon;
      total += v;
    }
    for (auto& v : prior) v /= total;
  }
  return out;
}

SparseProbs reweight(const SparseProbs& tile_probs, std::span<const double> prior) {
  SparseProbs out;
  out.reserve(tile_probs.size());
  double total = 0.0;
  for (const auto& e : tile_probs) {
    if (e.index >= prior.size()) {
      throw InputError("reweight: species index " + std::to_string(e.index) +
                       " outside the prior");
    }
    const double w = e.prob * prior[e.index];
    if (w > 0.0) {
      out.push_back({e.index, w});
      total += w;
    }
  }
  if (!(total > 0.0)) return tile_probs;  // prior carries no mass on this support
  for (auto& e : out) e.prob /= total;
  std::stable_sort(out.begin(), out.end(),
                   [](const ProbEntry& a, const ProbEntry& b) { return a.prob > b.prob; });
  return out;
}

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size()) throw InputError("adjusted_rand_index: label lengths differ");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> table;
  std::map<std::uint32_t, double> rows;
  std::map<std::uint32_t, double> cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, count] : table) index += choose2(count);
  double sum_a = 0.0;
  for (const auto& [key, count] : rows) sum_a += choose2(count);
  double sum_b = 0.0;
  for (const auto& [key, count] : cols) sum_b += choose2(count);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace quadrat
