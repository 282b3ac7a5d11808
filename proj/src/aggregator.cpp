#include "quadrat/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

constexpr double kMassTolerance = 1e-6;

bool ranks_before(const ProbEntry& a, const ProbEntry& b) {
  if (a.prob != b.prob) return a.prob > b.prob;
  return a.index < b.index;
}

}  // namespace

void sort_by_probability(SparseProbs& probs) { std::sort(probs.begin(), probs.end(), ranks_before); }

void validate_tile(const TilePrediction& tile, std::size_t species_count) {
  const std::string where = "tile (" + tile.image_id + ", " + std::to_string(tile.row) + ", " +
                            std::to_string(tile.col) + ")";
  std::unordered_set<SpeciesIndex> seen;
  double mass = 0.0;
  for (const auto& e : tile.probs) {
    if (e.index >= species_count) {
      throw InvariantError(where + ": species index " + std::to_string(e.index) + " out of range");
    }
    if (!(e.prob > 0.0 && e.prob <= 1.0)) {
      throw InvariantError(where + ": probability outside (0, 1]");
    }
    if (!seen.insert(e.index).second) {
      throw InvariantError(where + ": duplicate species index " + std::to_string(e.index));
    }
    mass += e.prob;
  }
  if (mass > 1.0 + kMassTolerance) throw InvariantError(where + ": probability mass exceeds 1");
  if (tile.dense_complete && std::abs(mass - 1.0) > kMassTolerance) {
    throw InvariantError(where + ": dense record does not sum to 1");
  }
}

SparseProbs top_k_of_tile(const TilePrediction& tile, std::size_t k) {
  SparseProbs out = tile.probs;
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    ranks_before);
  out.resize(keep);
  return out;
}

VoteTally tally_votes(std::span<const TilePrediction> tiles, std::size_t k) {
  if (tiles.empty()) throw InputError("tally_votes: no tiles");
  std::map<SpeciesIndex, VoteEntry> acc;
  for (const auto& tile : tiles) {
    if (tile.image_id != tiles.front().image_id) {
      throw InputError("tally_votes: tiles from images '" + tiles.front().image_id + "' and '" +
                       tile.image_id + "' mixed");
    }
    for (const auto& e : top_k_of_tile(tile, k)) {
      auto& v = acc[e.index];
      v.index = e.index;
      v.votes += 1;
      v.mass += e.prob;
    }
  }
  VoteTally tally;
  tally.tile_count = tiles.size();
  tally.entries.reserve(acc.size());
  for (const auto& [idx, v] : acc) tally.entries.push_back(v);
  return tally;
}

std::vector<SpeciesIndex> select_labels(const VoteTally& tally, int min_votes,
                                        std::size_t max_labels) {
  if (tally.empty()) throw InvariantError("select_labels: empty tally");
  std::vector<VoteEntry> ranked = tally.entries;
  std::sort(ranked.begin(), ranked.end(), [](const VoteEntry& a, const VoteEntry& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.mass != b.mass) return a.mass > b.mass;
    return a.index < b.index;
  });
  std::vector<SpeciesIndex> labels;
  for (const auto& v : ranked) {
    if (labels.size() >= max_labels) break;
    if (v.votes >= min_votes) labels.push_back(v.index);
  }
  if (labels.empty()) labels.push_back(ranked.front().index);
  return labels;
}

std::vector<SpeciesIndex> naive_baseline(std::span<const std::uint64_t> training_counts,
                                         std::size_t k) {
  if (training_counts.empty()) throw InputError("naive_baseline: no species counts");
  std::vector<SpeciesIndex> order(training_counts.size());
  std::iota(order.begin(), order.end(), SpeciesIndex{0});
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](SpeciesIndex a, SpeciesIndex b) {
                      if (training_counts[a] != training_counts[b]) {
                        return training_counts[a] > training_counts[b];
                      }
                      return a < b;
                    });
  order.resize(keep);
  return order;
}

}  // namespace quadrat
