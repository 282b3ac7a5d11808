#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "quadrat/aggregator.hpp"
#include "quadrat/catalog.hpp"
#include "quadrat/clusterer.hpp"
#include "quadrat/evaluator.hpp"
#include "quadrat/geofilter.hpp"
#include "quadrat/projector.hpp"
#include "quadrat/tiler.hpp"

namespace quadrat {

struct SynthParams {
  std::size_t images = 100;
  std::size_t species = 50;
  std::size_t clusters = 3;
  GridSpec grid{4, 4};
  double noise = 0.5;  // 0 gives single-species tiles with probability 1
  std::size_t min_species = 2;
  std::size_t max_species = 5;
  std::size_t embedding_dim = 32;
  double separation = 10.0;  // distance between cluster centres, in noise standard deviations
  std::size_t quadrats_per_transect = 4;
  int width_px = 2000;
  int height_px = 2000;
  std::uint64_t seed = 42;

  /// Throws InputError on parameters that cannot produce a world.
  void validate() const;
};

/// A generated world. Image i belongs to region i mod 13 and that region belongs to
/// cluster (region mod clusters); each cluster draws its truth species from its own pool.
struct SynthBundle {
  SpeciesCatalog catalog;
  RegionRegistry registry;
  std::vector<GeoRegion> geo_regions;
  std::vector<Observation> observations;
  std::vector<std::uint64_t> training_counts;  // by dense index
  EmbeddingMatrix embeddings;
  std::vector<TilePrediction> tiles;
  std::vector<TilePrediction> whole_image_tiles;  // one 1x1 record per image
  GroundTruth truth;
  std::vector<QuadratRecord> quadrats;
  std::vector<ClusterId> generator_clusters;  // aligned with embeddings.image_ids
};

SynthBundle synth(const SynthParams& params);

/// Writes the bundle files plus a ready-to-run config.json into `dir`.
void write_bundle(const SynthBundle& bundle, const SynthParams& params, const std::filesystem::path& dir);

}  // namespace quadrat
