#include <doctest.h>

#include "quadrat/aggregator.hpp"
#include "quadrat/errors.hpp"
#include "support/oracles.hpp"

using namespace quadrat;

namespace {

TilePrediction tile(std::string image, SparseProbs probs, bool dense = false) {
  TilePrediction t;
  t.image_id = std::move(image);
  t.probs = std::move(probs);
  t.dense_complete = dense;
  sort_by_probability(t.probs);
  return t;
}

std::vector<SpeciesIndex> indices(const SparseProbs& p) {
  std::vector<SpeciesIndex> out;
  for (const auto& e : p) out.push_back(e.index);
  return out;
}

}  // namespace

TEST_CASE("top_k ordering, ties and truncation") {
  CHECK(top_k_of_tile(tile("a", {{3, 0.5}, {1, 0.3}, {2, 0.2}}), 2) == SparseProbs{{3, 0.5}, {1, 0.3}});
  CHECK(top_k_of_tile(tile("a", {{3, 0.4}, {1, 0.4}}), 1) == SparseProbs{{1, 0.4}});
  const auto five = tile("a", {{0, 0.1}, {1, 0.1}, {2, 0.1}, {3, 0.1}, {4, 0.1}});
  CHECK(top_k_of_tile(five, 9).size() == 5);
}

TEST_CASE("tile validation") {
  CHECK_NOTHROW(validate_tile(tile("a", {{0, 0.5}, {1, 0.5}}, true), 2));
  CHECK_THROWS_AS(validate_tile(tile("a", {{0, 0.5}, {1, 0.4}}, true), 2), InvariantError);
  CHECK_NOTHROW(validate_tile(tile("a", {{0, 0.5}, {1, 0.4}}), 2));
  CHECK_THROWS_AS(validate_tile(tile("a", {{2, 0.5}}), 2), InvariantError);
  CHECK_THROWS_AS(validate_tile(tile("a", {{0, 0.5}, {0, 0.2}}), 2), InvariantError);
  CHECK_THROWS_AS(validate_tile(tile("a", {{0, 0.0}}), 2), InvariantError);
  CHECK_THROWS_AS(validate_tile(tile("a", {{0, 0.7}, {1, 0.7}}), 2), InvariantError);
}

TEST_CASE("unanimous vote") {
  std::vector<TilePrediction> tiles;
  for (int i = 0; i < 16; ++i) tiles.push_back(tile("img", {{7, 0.9}, {static_cast<SpeciesIndex>(i % 3), 0.05}}));
  const auto tally = tally_votes(tiles, 1);
  REQUIRE(tally.entries.size() == 1);
  CHECK(tally.entries[0].index == 7);
  CHECK(tally.entries[0].votes == 16);
  CHECK(tally.tile_count == 16);
}

TEST_CASE("single tile tally equals its top-k") {
  const auto t = tile("img", {{4, 0.5}, {2, 0.3}, {9, 0.2}});
  const auto tally = tally_votes(std::vector{t}, 2);
  REQUIRE(tally.entries.size() == 2);
  CHECK(tally.entries[0] == VoteEntry{2, 1, 0.3});
  CHECK(tally.entries[1] == VoteEntry{4, 1, 0.5});
}

TEST_CASE("two tile tally and selection") {
  const std::vector tiles{tile("img", {{5, 0.6}, {9, 0.3}}), tile("img", {{9, 0.5}, {4, 0.4}})};
  const auto tally = tally_votes(tiles, 2);
  REQUIRE(tally.entries.size() == 3);
  CHECK(tally.entries[0].index == 4);
  CHECK(tally.entries[0].votes == 1);
  CHECK(tally.entries[1].index == 5);
  CHECK(tally.entries[1].votes == 1);
  CHECK(tally.entries[2].index == 9);
  CHECK(tally.entries[2].votes == 2);
  CHECK(tally.entries[2].mass == doctest::Approx(0.8));

  CHECK(select_labels(tally, 2, 10) == std::vector<SpeciesIndex>{9});
  CHECK(select_labels(tally, 1, kUnlimitedLabels) == std::vector<SpeciesIndex>{9, 5, 4});
}

TEST_CASE("selection falls back to the single best species") {
  const std::vector tiles{tile("img", {{3, 0.2}}), tile("img", {{1, 0.4}}), tile("img", {{2, 0.4}})};
  const auto tally = tally_votes(tiles, 1);
  CHECK(select_labels(tally, 2, 10) == std::vector<SpeciesIndex>{1});
}

TEST_CASE("tally rejects mixed images and empty input") {
  const std::vector tiles{tile("a", {{0, 0.5}}), tile("b", {{0, 0.5}})};
  CHECK_THROWS_AS(tally_votes(tiles, 1), InputError);
  CHECK_THROWS_AS(tally_votes(std::vector<TilePrediction>{}, 1), InputError);
}

TEST_CASE("naive baseline") {
  const std::vector<std::uint64_t> counts{100, 50, 10};
  CHECK(naive_baseline(counts, 2) == std::vector<SpeciesIndex>{0, 1});
  const std::vector<std::uint64_t> tied{5, 5};
  CHECK(naive_baseline(tied, 1) == std::vector<SpeciesIndex>{0});
  CHECK(naive_baseline(counts, 10).size() == 3);
  CHECK_THROWS_AS(naive_baseline(std::vector<std::uint64_t>{}, 1), InputError);
}

TEST_CASE("tally and selection match brute-force enumeration") {
  oracle::Rng rng(5);
  for (int round = 0; round < 100; ++round) {
    const std::size_t species = 2 + rng() % 12;
    const int tiles_n = oracle::uniform_int(rng, 1, 9);
    std::vector<TilePrediction> tiles;
    for (int t = 0; t < tiles_n; ++t) tiles.push_back(oracle::random_tile(rng, "img", species, 1 + rng() % species));
    const std::size_t k = 1 + rng() % 6;
    const auto tally = tally_votes(tiles, k);
    const auto brute = oracle::brute_tally(tiles, k);
    REQUIRE(tally.entries.size() == brute.votes.size());
    for (const auto& e : tally.entries) {
      CHECK(e.votes == brute.votes.at(e.index));
      CHECK(e.mass == brute.mass.at(e.index));
      CHECK(e.votes >= 1);
      CHECK(e.votes <= tiles_n);
    }
    const int min_votes = oracle::uniform_int(rng, 1, 3);
    const std::size_t max_labels = 1 + rng() % 6;
    CHECK(select_labels(tally, min_votes, max_labels) == oracle::brute_select(brute, min_votes, max_labels));

    // Raising k never lowers a vote count.
    const auto wider = tally_votes(tiles, k + 1);
    for (const auto& e : tally.entries) {
      auto it = std::find_if(wider.entries.begin(), wider.entries.end(),
                             [&](const VoteEntry& w) { return w.index == e.index; });
      REQUIRE(it != wider.entries.end());
      CHECK(it->votes >= e.votes);
    }
  }
}

TEST_CASE("top_k agrees with full sorting") {
  oracle::Rng rng(9);
  for (int round = 0; round < 100; ++round) {
    const auto t = oracle::random_tile(rng, "x", 20, 1 + rng() % 20);
    const std::size_t k = 1 + rng() % 25;
    const auto top = top_k_of_tile(t, k);
    std::vector<SpeciesIndex> expected;
    for (std::size_t e = 0; e < t.probs.size(); ++e) {
      if (oracle::rank_in_tile(t, e) < k) expected.push_back(t.probs[e].index);
    }
    auto got = indices(top);
    CHECK(got.size() == expected.size());
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    CHECK(got == expected);
  }
}
