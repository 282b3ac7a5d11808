#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace quadrat {

/// Per-image embedding rows with aligned identifiers.
struct EmbeddingMatrix {
  std::vector<std::string> image_ids;
  Eigen::MatrixXd data;  // n x d

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data.rows()); }
  /// n >= 2, finite values, ids unique and aligned. Throws InputError.
  void validate() const;
};

struct IndexPair {
  std::uint32_t anchor = 0;
  std::uint32_t other = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

struct PairSets {
  std::vector<IndexPair> near;
  std::vector<IndexPair> mid_near;
  std::vector<IndexPair> further;
  friend bool operator==(const PairSets&, const PairSets&) = default;
};

struct ProjectorConfig {
  int n_neighbors = 10;
  double mn_ratio = 0.5;
  double fp_ratio = 2.0;
  std::array<int, 3> phase_iters{100, 100, 250};
  double learning_rate = 1.0;
  std::uint64_t seed = 42;

  int total_iters() const noexcept { return phase_iters[0] + phase_iters[1] + phase_iters[2]; }
  /// Throws InputError on negative counts or ratios.
  void validate() const;
};

struct PhaseWeights {
  double near = 0.0;
  double mid_near = 0.0;
  double further = 0.0;
  friend bool operator==(const PhaseWeights&, const PhaseWeights&) = default;
};

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // n x 2
};

struct Projection {
  std::vector<std::string> image_ids;
  Eigen::MatrixXd points;  // n x 2, rows aligned with the input embeddings
  double initial_loss = 0.0;  // both losses use the last iteration's weights
  double final_loss = 0.0;
};

inline constexpr int kPcaDimensions = 100;

/// Mean-centres the columns, then keeps the top 100 principal components when d > 100.
EmbeddingMatrix preprocess(const EmbeddingMatrix& x);

/// Near, mid-near and further pair construction over preprocessed rows.
/// Throws InputError when n <= n_neighbors.
PairSets build_pairs(const Eigen::MatrixXd& x, const ProjectorConfig& cfg, std::mt19937_64& rng);

/// Objective value and its exact gradient for a 2-D layout `y`.
LossGrad loss_and_grad(const Eigen::MatrixXd& y, const PairSets& pairs, const PhaseWeights& w);

/// Three-phase weight schedule: mid-near weight decays 1000 -> 3, then holds at 3, then 0.
PhaseWeights phase_weights(int iteration, const ProjectorConfig& cfg);

/// PCA-initialised layout optimised with Adam for total_iters() steps.
Projection fit(const EmbeddingMatrix& x, const ProjectorConfig& cfg);

}  // namespace quadrat
