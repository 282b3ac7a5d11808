#pragma once

// Readers and writers for every on-disk format the toolkit exchanges. Writers return the
// exact bytes (LF line endings); `write_*` helpers put them on disk.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "quadrat/aggregator.hpp"
#include "quadrat/catalog.hpp"
#include "quadrat/clusterer.hpp"
#include "quadrat/evaluator.hpp"
#include "quadrat/geofilter.hpp"
#include "quadrat/projector.hpp"
#include "quadrat/tiler.hpp"

namespace quadrat {

namespace fs = std::filesystem;

// Tile predictions: NDJSON {"image_id", "row", "col", "probs": [[index, prob], ...]}
// with an optional boolean "dense".
std::vector<TilePrediction> parse_tile_predictions(std::string_view text, const std::string& source,
                                                   std::size_t species_count);
std::vector<TilePrediction> read_tile_predictions(const fs::path& path, std::size_t species_count);
std::string format_tile_predictions(std::span<const TilePrediction> tiles);

// Tile plan: NDJSON {"row", "col", "x0", "y0", "x1", "y1"}.
std::string format_tile_plan(std::span<const TileRect> tiles, std::string_view image_id = {});
std::vector<TileRect> parse_tile_plan(std::string_view text, const std::string& source);

// Embeddings: NDJSON {"image_id", "vector": [...]}; every vector has the same length.
EmbeddingMatrix read_embeddings(const fs::path& path);
EmbeddingMatrix parse_embeddings(std::string_view text, const std::string& source);
std::string format_embeddings(const EmbeddingMatrix& x);

// Projection: CSV image_id,x,y with round-trip exact numbers.
std::string format_projection(const Projection& p);
Projection read_projection(const fs::path& path);

// Cluster assignments: CSV image_id,cluster.
struct Assignments {
  std::vector<std::string> image_ids;
  std::vector<ClusterId> clusters;
};
std::string format_assignments(std::span<const std::string> image_ids,
                               std::span<const ClusterId> clusters);
Assignments read_assignments(const fs::path& path);

// Region -> dominant cluster: CSV region,cluster.
std::string format_region_clusters(const RegionClusterMap& map);
RegionClusterMap read_region_clusters(const fs::path& path);

// Priors: NDJSON {"cluster": c, "prior": [S reals]}, clusters 0..k-1 in order.
std::string format_priors(const ClusterPriors& priors);
ClusterPriors read_priors(const fs::path& path, std::size_t species_count);

// Species mask: CSV species_id,allowed with allowed in {0, 1}.
std::string format_mask(const SpeciesMask& mask, const SpeciesCatalog& catalog);
SpeciesMask read_mask(const fs::path& path, const SpeciesCatalog& catalog);

// Observations: CSV species_id,lat,lon.
std::vector<Observation> read_observations(const fs::path& path);
std::string format_observations(std::span<const Observation> obs);

// Geographic regions: JSON [{"name": str, "polygon": [[lat, lon], ...]}, ...].
std::vector<GeoRegion> read_geo_regions(const fs::path& path);
std::vector<GeoRegion> parse_geo_regions(std::string_view text, const std::string& source);
std::string format_geo_regions(std::span<const GeoRegion> regions);

// Per-species training image counts: CSV species_id,count. Species absent from the file
// count as zero.
std::vector<std::uint64_t> read_training_counts(const fs::path& path, const SpeciesCatalog& catalog);

// Ground truth: CSV quadrat_id,transect_id,species_ids (space-separated ids in one field).
// The rule's explicit map overrides the file's transect_id; an empty transect_id falls back
// to transect_of().
GroundTruth read_ground_truth(const fs::path& path, const TransectRule& rule = {});
std::string format_ground_truth(const GroundTruth& truth);

// Submission: `quadrat_id;species_ids` with species_ids written as `[id1, id2, ...]`.
struct SubmissionRow {
  std::string quadrat_id;
  std::vector<SpeciesId> species_ids;
  friend bool operator==(const SubmissionRow&, const SubmissionRow&) = default;
};
/// Throws InputError on an empty row set, an empty or repeated species list, or a
/// duplicate quadrat.
std::string format_submission(std::span<const SubmissionRow> rows);
void write_submission(std::span<const SubmissionRow> rows, const fs::path& out);
std::vector<SubmissionRow> parse_submission(std::string_view text, const std::string& source);
std::vector<SubmissionRow> read_submission(const fs::path& path);

std::string format_report(const ScoreReport& report);

}  // namespace quadrat
