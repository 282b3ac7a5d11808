#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "quadrat/catalog.hpp"

namespace quadrat {

struct ProbEntry {
  SpeciesIndex index = 0;
  double prob = 0.0;
  friend bool operator==(const ProbEntry&, const ProbEntry&) = default;
};

/// Sparse class-probability vector, conventionally sorted by probability descending.
using SparseProbs = std::vector<ProbEntry>;

/// Orders entries by probability descending, lower index first on ties.
void sort_by_probability(SparseProbs& probs);

struct TilePrediction {
  std::string image_id;
  int row = 0;
  int col = 0;
  SparseProbs probs;
  bool dense_complete = false;  // record claims to carry the whole distribution
};

/// Checks index range, uniqueness, probability range and total mass.
/// Throws InvariantError describing the first violation.
void validate_tile(const TilePrediction& tile, std::size_t species_count);

/// The k highest-probability entries (fewer when the record is shorter).
SparseProbs top_k_of_tile(const TilePrediction& tile, std::size_t k);

struct VoteEntry {
  SpeciesIndex index = 0;
  int votes = 0;      // tiles whose top-k contains the species
  double mass = 0.0;  // summed probability over those tiles
  friend bool operator==(const VoteEntry&, const VoteEntry&) = default;
};

struct VoteTally {
  std::size_t tile_count = 0;
  std::vector<VoteEntry> entries;  // sorted by species index

  bool empty() const noexcept { return entries.empty(); }
};

/// Frequency vote over the top-k entries of every tile of one image.
/// Throws InputError when tiles belong to different images or `tiles` is empty.
VoteTally tally_votes(std::span<const TilePrediction> tiles, std::size_t k);

inline constexpr std::size_t kUnlimitedLabels = std::numeric_limits<std::size_t>::max();

/// Species with at least `min_votes`, ranked by (votes desc, mass desc, index asc) and
/// truncated to `max_labels`. An empty filter result falls back to the best-ranked species.
std::vector<SpeciesIndex> select_labels(const VoteTally& tally, int min_votes,
                                        std::size_t max_labels);

/// The k most frequent training species (ties to the lower index); the same answer for
/// every image. `training_counts` is indexed by dense species index.
std::vector<SpeciesIndex> naive_baseline(std::span<const std::uint64_t> training_counts,
                                         std::size_t k);

}  // namespace quadrat
