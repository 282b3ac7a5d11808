#include "quadrat/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

constexpr double kSigmaFloor = 1e-10;
constexpr double kNearDenominator = 10.0;
constexpr double kMidNearDenominator = 10000.0;
constexpr double kInitialMidNearWeight = 1000.0;
constexpr double kSettledMidNearWeight = 3.0;
constexpr double kInitScale = 0.01;
constexpr double kRandomInitScale = 1e-4;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-7;
constexpr int kMidNearSampleSize = 6;

// Eigenvectors of the sample covariance, sorted by eigenvalue descending, each flipped so its
// largest-magnitude component is positive.
struct Principal {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

Principal principal_axes(const Eigen::MatrixXd& centered) {
  const double denom = std::max<Eigen::Index>(centered.rows() - 1, 1);
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw InvariantError("eigendecomposition failed");
  const Eigen::Index d = cov.rows();
  Principal p;
  p.values.resize(d);
  p.vectors.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Index src = d - 1 - k;
    p.values(k) = solver.eigenvalues()(src);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.vectors.col(k) = v;
  }
  return p;
}

Eigen::VectorXd squared_distances_from(const Eigen::MatrixXd& x, Eigen::Index i) {
  return (x.rowwise() - x.row(i)).rowwise().squaredNorm();
}

// Indices of the `count` smallest keys (excluding `self`), ties to the lower index.
std::vector<std::uint32_t> smallest(const Eigen::VectorXd& keys, std::uint32_t self,
                                    std::size_t count) {
  std::vector<std::uint32_t> idx;
  idx.reserve(static_cast<std::size_t>(keys.size()));
  for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(keys.size()); ++j) {
    if (j != self) idx.push_back(j);
  }
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (keys(a) != keys(b)) return keys(a) < keys(b);
                      return a < b;
                    });
  idx.resize(count);
  return idx;
}

}  // namespace

void EmbeddingMatrix::validate() const {
  if (data.rows() < 2) throw InputError("embedding matrix needs at least 2 rows");
  if (image_ids.size() != static_cast<std::size_t>(data.rows())) {
    throw InputError("embedding ids are not aligned with rows");
  }
  if (!data.allFinite()) throw InputError("embedding matrix contains non-finite values");
  std::unordered_set<std::string> seen;
  for (const auto& id : image_ids) {
    if (!seen.insert(id).second) throw InputError("duplicate embedding image_id '" + id + "'");
  }
}

void ProjectorConfig::validate() const {
  if (n_neighbors < 1) throw InputError("n_neighbors must be >= 1");
  if (!(mn_ratio >= 0.0) || !(fp_ratio >= 0.0)) throw InputError("pair ratios must be >= 0");
  for (int it : phase_iters) {
    if (it < 0) throw InputError("phase iteration counts must be >= 0");
  }
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
}

EmbeddingMatrix preprocess(const EmbeddingMatrix& x) {
  x.validate();
  EmbeddingMatrix out;
  out.image_ids = x.image_ids;
  const Eigen::RowVectorXd mean = x.data.colwise().mean();
  Eigen::MatrixXd centered = x.data.rowwise() - mean;
  if (centered.cols() > kPcaDimensions) {
    const Principal p = principal_axes(centered);
    out.data = centered * p.vectors.leftCols(kPcaDimensions);
  } else {
    out.data = std::move(centered);
  }
  return out;
}

PairSets build_pairs(const Eigen::MatrixXd& x, const ProjectorConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto n = static_cast<std::uint32_t>(x.rows());
  const auto n_nb = static_cast<std::uint32_t>(cfg.n_neighbors);
  if (n <= n_nb) {
    throw InputError("build_pairs: need more than n_neighbors=" + std::to_string(n_nb) +
                     " points, got " + std::to_string(n));
  }

  // Local scale: mean distance to the 4th..6th nearest neighbours.
  std::vector<double> sigma(n, 1.0);
  if (n - 1 >= 4) {
    for (std::uint32_t i = 0; i < n; ++i) {
      const Eigen::VectorXd d2 = squared_distances_from(x, i);
      const auto knn = smallest(d2, i, 6);
      double sum = 0.0;
      for (std::size_t r = 3; r < knn.size(); ++r) sum += std::sqrt(d2(knn[r]));
      sigma[i] = std::max(sum / static_cast<double>(knn.size() - 3), kSigmaFloor);
    }
  }

  PairSets pairs;
  pairs.near.reserve(static_cast<std::size_t>(n) * n_nb);
  std::vector<std::vector<std::uint32_t>> neighbours(n);
  const Eigen::Map<const Eigen::VectorXd> sig(sigma.data(), n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Eigen::VectorXd scaled =
        (squared_distances_from(x, i).array() / (sig.array() * sigma[i])).matrix();
    neighbours[i] = smallest(scaled, i, n_nb);
    for (auto j : neighbours[i]) pairs.near.push_back({i, j});
  }

  std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
  const auto n_mn = static_cast<std::size_t>(std::lround(cfg.n_neighbors * cfg.mn_ratio));
  const std::size_t sample_size = std::min<std::size_t>(kMidNearSampleSize, n - 1);
  pairs.mid_near.reserve(n * n_mn);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < n_mn; ++m) {
      std::vector<std::uint32_t> sampled;
      while (sampled.size() < sample_size) {
        const auto j = pick(rng);
        if (j != i && std::find(sampled.begin(), sampled.end(), j) == sampled.end()) {
          sampled.push_back(j);
        }
      }
      std::vector<std::pair<double, std::uint32_t>> ranked;
      for (auto j : sampled) ranked.emplace_back((x.row(i) - x.row(j)).squaredNorm(), j);
      std::sort(ranked.begin(), ranked.end());
      pairs.mid_near.push_back({i, ranked[ranked.size() >= 2 ? 1 : 0].second});
    }
  }

  const auto n_fp = static_cast<std::size_t>(std::lround(cfg.n_neighbors * cfg.fp_ratio));
  pairs.further.reserve(n * n_fp);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<bool> excluded(n, false);
    excluded[i] = true;
    for (auto j : neighbours[i]) excluded[j] = true;
    const std::size_t available = n - 1 - neighbours[i].size();
    if (n_fp >= available) {
      for (std::uint32_t j = 0; j < n; ++j) {
        if (!excluded[j]) pairs.further.push_back({i, j});
      }
      continue;
    }
    for (std::size_t f = 0; f < n_fp;) {
      const auto j = pick(rng);
      if (excluded[j]) continue;
      excluded[j] = true;
      pairs.further.push_back({i, j});
      ++f;
    }
  }
  return pairs;
}

LossGrad loss_and_grad(const Eigen::MatrixXd& y, const PairSets& pairs, const PhaseWeights& w) {
  LossGrad out;
  out.grad = Eigen::MatrixXd::Zero(y.rows(), y.cols());
  auto accumulate = [&](const std::vector<IndexPair>& set, double weight, auto term) {
    if (weight == 0.0) return;
    for (const auto& p : set) {
      const Eigen::RowVectorXd diff = y.row(p.anchor) - y.row(p.other);
      const double dt = diff.squaredNorm() + 1.0;
      const auto [value, slope] = term(dt);
      out.loss += weight * value;
      const Eigen::RowVectorXd g = (2.0 * weight * slope) * diff;
      out.grad.row(p.anchor) += g;
      out.grad.row(p.other) -= g;
    }
  };
  // Each term returns (value, d value / d dt).
  accumulate(pairs.near, w.near, [](double dt) {
    const double den = kNearDenominator + dt;
    return std::pair{dt / den, kNearDenominator / (den * den)};
  });
  accumulate(pairs.mid_near, w.mid_near, [](double dt) {
    const double den = kMidNearDenominator + dt;
    return std::pair{dt / den, kMidNearDenominator / (den * den)};
  });
  accumulate(pairs.further, w.further, [](double dt) {
    const double den = 1.0 + dt;
    return std::pair{1.0 / den, -1.0 / (den * den)};
  });
  return out;
}

PhaseWeights phase_weights(int iteration, const ProjectorConfig& cfg) {
  const int p1 = cfg.phase_iters[0];
  const int p2 = cfg.phase_iters[1];
  if (iteration < p1) {
    const double frac = static_cast<double>(iteration) / p1;
    return {2.0, (1.0 - frac) * kInitialMidNearWeight + frac * kSettledMidNearWeight, 1.0};
  }
  if (iteration < p1 + p2) return {2.0, kSettledMidNearWeight, 1.0};
  return {1.0, 0.0, 1.0};
}

Projection fit(const EmbeddingMatrix& x, const ProjectorConfig& cfg) {
  cfg.validate();
  const EmbeddingMatrix prepared = preprocess(x);
  std::mt19937_64 rng(cfg.seed);
  const PairSets pairs = build_pairs(prepared.data, cfg, rng);

  const Eigen::Index n = prepared.data.rows();
  Eigen::MatrixXd y(n, 2);
  bool degenerate = prepared.data.cols() < 2;
  if (!degenerate) {
    const Principal p = principal_axes(prepared.data);
    degenerate = !(p.values(0) > 0.0) || !(p.values(1) > 1e-12 * p.values(0));
    if (!degenerate) y = kInitScale * (prepared.data * p.vectors.leftCols(2));
  }
  if (degenerate) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = kRandomInitScale * gauss(rng);
    }
  }

  const int total = cfg.total_iters();
  const PhaseWeights last = phase_weights(std::max(total - 1, 0), cfg);
  Projection out;
  out.image_ids = prepared.image_ids;
  out.initial_loss = loss_and_grad(y, pairs, last).loss;

  Eigen::ArrayXXd m = Eigen::ArrayXXd::Zero(n, 2);
  Eigen::ArrayXXd v = Eigen::ArrayXXd::Zero(n, 2);
  for (int t = 0; t < total; ++t) {
    const LossGrad lg = loss_and_grad(y, pairs, phase_weights(t, cfg));
    const Eigen::ArrayXXd g = lg.grad.array();
    const double lr_t = cfg.learning_rate * std::sqrt(1.0 - std::pow(kAdamBeta2, t + 1)) /
                        (1.0 - std::pow(kAdamBeta1, t + 1));
    m += (1.0 - kAdamBeta1) * (g - m);
    v += (1.0 - kAdamBeta2) * (g.square() - v);
    y.array() -= lr_t * m / (v.sqrt() + kAdamEpsilon);
  }
  if (!y.allFinite()) throw InvariantError("projection diverged to non-finite values");
  out.final_loss = loss_and_grad(y, pairs, last).loss;
  out.points = std::move(y);
  return out;
}

}  // namespace quadrat
