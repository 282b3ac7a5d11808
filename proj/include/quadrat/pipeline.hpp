#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "quadrat/aggregator.hpp"
#include "quadrat/catalog.hpp"
#include "quadrat/clusterer.hpp"
#include "quadrat/evaluator.hpp"
#include "quadrat/formats.hpp"
#include "quadrat/geofilter.hpp"
#include "quadrat/projector.hpp"
#include "quadrat/tiler.hpp"

namespace quadrat {

enum class PipelineMode { baseline, no_tiling, tiling };

PipelineMode parse_mode(std::string_view text);
std::string_view to_string(PipelineMode mode);

struct GeoConfig {
  bool enabled = false;
  LatLon reference = kDefaultReference;
  fs::path regions;
  fs::path observations;
  bool renormalize = false;
};

enum class ClusterSpace { projection, embedding };

struct PriorsConfig {
  bool enabled = false;
  double epsilon = 1e-6;
  std::size_t k = 3;
  fs::path embeddings;
  fs::path registry;  // empty: the built-in thirteen-region registry
  ClusterSpace space = ClusterSpace::projection;
  ProjectorConfig projector;  // its seed is replaced by RunConfig::seed
};

struct RunConfig {
  PipelineMode mode = PipelineMode::tiling;
  GridSpec grid{4, 4};
  std::optional<std::size_t> k_per_tile;  // unset: a per-mode default
  int min_votes = 2;
  std::size_t max_labels = 10;
  GeoConfig geo;
  PriorsConfig priors;
  std::uint64_t seed = 42;
  int threads = 1;

  fs::path catalog;
  fs::path tiles;
  fs::path training_counts;
  fs::path truth;
  fs::path transect_map;
  fs::path quadrats;
  std::string transect_delimiter = "-";

  fs::path submission_out;
  fs::path report_out;
  fs::path intermediates_dir;
  bool keep_intermediates = false;

  std::size_t resolved_k() const;
  /// The grid actually used: 1x1 in no-tiling mode.
  GridSpec effective_grid() const;
  /// Checks mode-specific required inputs and value ranges; throws InputError.
  void validate() const;
};

/// Overlays a JSON config document on `cfg`. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected.
void apply_config_json(RunConfig& cfg, std::string_view json_text, const fs::path& base_dir);
RunConfig load_run_config(const fs::path& path);

struct ImageTiles {
  std::string image_id;
  std::vector<TilePrediction> tiles;  // sorted by (row, col)
};

/// Groups records by image in first-appearance order; duplicate cells are rejected.
std::vector<ImageTiles> group_by_image(std::vector<TilePrediction> tiles);
std::vector<TilePrediction> flatten(const std::vector<ImageTiles>& images);

/// Every image must carry exactly the cells of `grid`. Throws InputError.
void check_grid_coverage(const std::vector<ImageTiles>& images, GridSpec grid);

/// Plans the pixel grid of each quadrat; fails for images smaller than the grid.
std::vector<std::pair<std::string, std::vector<TileRect>>> plan_tiles(
    const std::vector<QuadratRecord>& quadrats, GridSpec grid);

/// Applies the species mask to every tile. A tile that loses all entries keeps its
/// unmasked top-1 entry instead.
std::vector<ImageTiles> mask_tiles(const std::vector<ImageTiles>& images, const SpeciesMask& mask,
                                   bool renormalize, int threads = 1);

/// Image-level distribution: mean of the tile vectors, renormalised to unit mass.
std::vector<double> image_vector(const ImageTiles& image, std::size_t species_count);

/// Cluster priors from tile predictions; every image needs an assignment.
ClusterPriors priors_from_tiles(const std::vector<ImageTiles>& images, const Assignments& assignments,
                                std::size_t cluster_count, double epsilon,
                                std::size_t species_count);

/// Reweights each image's tiles by the prior of its region's dominant cluster.
std::vector<ImageTiles> reweight_tiles(const std::vector<ImageTiles>& images,
                                       const ClusterPriors& priors,
                                       const RegionClusterMap& region_map,
                                       const RegionRegistry& registry, int threads = 1);

/// Vote aggregation per image; rows come back sorted by quadrat id.
std::vector<SubmissionRow> aggregate_images(const std::vector<ImageTiles>& images, std::size_t k,
                                            int min_votes, std::size_t max_labels,
                                            const SpeciesCatalog& catalog, int threads = 1);

std::vector<SubmissionRow> baseline_submission(std::vector<std::string> quadrat_ids,
                                               std::span<const std::uint64_t> training_counts,
                                               std::size_t k, const SpeciesCatalog& catalog);

/// Clusters either the 2-D projection or the preprocessed embeddings.
struct ClusterStage {
  Projection projection;
  Assignments assignments;
  RegionClusterMap region_map;
};
ClusterStage cluster_images(const EmbeddingMatrix& embeddings, const PriorsConfig& cfg,
                            std::uint64_t seed, const RegionRegistry& registry);
/// Clustering of an existing projection (the `cluster` subcommand path).
ClusterStage cluster_projection(Projection projection, std::size_t k, std::uint64_t seed,
                                const RegionRegistry& registry);

std::map<std::string, LabelSet> predictions_of(std::span<const SubmissionRow> rows);

struct RunResult {
  std::vector<SubmissionRow> submission;
  std::optional<ScoreReport> report;
};

/// Runs the configured pipeline and writes the submission (and report, intermediates)
/// when output paths are set.
RunResult run(const RunConfig& cfg);

struct AblationRow {
  std::string method;
  std::size_t top_k = 0;
  std::string tiles;
  double score = 0.0;
};

/// The ablation grid: naive baselines, whole-image and tiled runs, +GEO and +PRIORS.
/// `whole_image_tiles` holds 1x1 predictions; rows needing unavailable inputs are skipped.
std::vector<AblationRow> run_ablation(const RunConfig& base, const fs::path& whole_image_tiles);
std::string format_ablation(std::span<const AblationRow> rows);

}  // namespace quadrat
