#include "quadrat/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"

namespace quadrat {

using json = nlohmann::json;

namespace {

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so the output
// does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

RegionRegistry registry_for(const PriorsConfig& cfg) {
  return cfg.registry.empty() ? RegionRegistry::plantclef_default() : load_region_registry(cfg.registry);
}

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return (p.is_absolute() || base.empty()) ? p : base / p;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw InputError("config: unknown key '" + where + key + "'");
    }
  }
}

// Prefixes stage errors with the stage name, keeping the error category.
template <typename Fn>
auto in_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const InvariantError& e) {
    throw InvariantError(std::string(name) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string(name) + ": " + e.what());
  }
}

void stage_output(const RunConfig& cfg, const std::string& name, const std::string& bytes) {
  if (cfg.keep_intermediates) csv::write_text(cfg.intermediates_dir / name, bytes);
}

}  // namespace

PipelineMode parse_mode(std::string_view text) {
  if (text == "baseline") return PipelineMode::baseline;
  if (text == "no-tiling") return PipelineMode::no_tiling;
  if (text == "tiling") return PipelineMode::tiling;
  throw InputError("unknown mode '" + std::string(text) + "' (baseline, no-tiling, tiling)");
}

std::string_view to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::baseline: return "baseline";
    case PipelineMode::no_tiling: return "no-tiling";
    case PipelineMode::tiling: return "tiling";
  }
  return "?";
}

std::size_t RunConfig::resolved_k() const {
  if (k_per_tile) return *k_per_tile;
  switch (mode) {
    case PipelineMode::baseline: return 10;
    case PipelineMode::no_tiling: return 20;
    case PipelineMode::tiling: return (geo.enabled && !priors.enabled) ? 10 : 9;
  }
  return 9;
}

GridSpec RunConfig::effective_grid() const {
  return mode == PipelineMode::no_tiling ? GridSpec{1, 1} : grid;
}

void RunConfig::validate() const {
  if (catalog.empty()) throw InputError("config: catalog path is required");
  if (k_per_tile && *k_per_tile == 0) throw InputError("config: k_per_tile must be >= 1");
  if (min_votes < 1) throw InputError("config: min_votes must be >= 1");
  if (max_labels < 1) throw InputError("config: max_labels must be >= 1");
  if (threads < 1) throw InputError("config: threads must be >= 1");
  if (grid.rows < 1 || grid.cols < 1) throw InputError("config: grid must be at least 1x1");
  if (keep_intermediates && intermediates_dir.empty()) {
    throw InputError("config: keep_intermediates needs an intermediates directory");
  }
  if (mode == PipelineMode::baseline) {
    if (training_counts.empty()) throw InputError("config: baseline mode needs training_counts");
    if (geo.enabled || priors.enabled) {
      throw InputError("config: geo and priors do not apply to baseline mode");
    }
    return;
  }
  if (tiles.empty()) throw InputError("config: tiles path is required");
  if (geo.enabled && (geo.regions.empty() || geo.observations.empty())) {
    throw InputError("config: geo needs regions and observations");
  }
  if (priors.enabled) {
    if (priors.embeddings.empty()) throw InputError("config: priors need embeddings");
    if (priors.k < 1) throw InputError("config: priors.k must be >= 1");
    if (!(priors.epsilon >= 0.0)) throw InputError("config: priors.epsilon must be >= 0");
    priors.projector.validate();
  }
}

void apply_config_json(RunConfig& cfg, std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("config: expected a JSON object");
  try {
    reject_unknown(doc, {"mode", "grid", "k_per_tile", "min_votes", "max_labels", "seed", "threads",
                         "catalog", "tiles", "training_counts", "truth", "transect_map", "quadrats",
                         "transect_delimiter", "geo", "priors", "output"},
                   "");
    auto path_of = [&](const json& obj, const char* key, fs::path& out) {
      if (obj.contains(key)) out = resolve(base_dir, obj.at(key).get<std::string>());
    };
    if (doc.contains("mode")) cfg.mode = parse_mode(doc["mode"].get<std::string>());
    if (doc.contains("grid")) cfg.grid = parse_grid(doc["grid"].get<std::string>());
    if (doc.contains("k_per_tile")) cfg.k_per_tile = doc["k_per_tile"].get<std::size_t>();
    if (doc.contains("min_votes")) cfg.min_votes = doc["min_votes"].get<int>();
    if (doc.contains("max_labels")) cfg.max_labels = doc["max_labels"].get<std::size_t>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
    if (doc.contains("transect_delimiter")) cfg.transect_delimiter = doc["transect_delimiter"].get<std::string>();
    path_of(doc, "catalog", cfg.catalog);
    path_of(doc, "tiles", cfg.tiles);
    path_of(doc, "training_counts", cfg.training_counts);
    path_of(doc, "truth", cfg.truth);
    path_of(doc, "transect_map", cfg.transect_map);
    path_of(doc, "quadrats", cfg.quadrats);
    if (doc.contains("geo")) {
      const json& g = doc["geo"];
      reject_unknown(g, {"enabled", "ref_lat", "ref_lon", "regions", "observations", "renormalize"}, "geo.");
      if (g.contains("enabled")) cfg.geo.enabled = g["enabled"].get<bool>();
      if (g.contains("ref_lat")) cfg.geo.reference.lat = g["ref_lat"].get<double>();
      if (g.contains("ref_lon")) cfg.geo.reference.lon = g["ref_lon"].get<double>();
      if (g.contains("renormalize")) cfg.geo.renormalize = g["renormalize"].get<bool>();
      path_of(g, "regions", cfg.geo.regions);
      path_of(g, "observations", cfg.geo.observations);
    }
    if (doc.contains("priors")) {
      const json& p = doc["priors"];
      reject_unknown(p, {"enabled", "epsilon", "k", "embeddings", "registry", "cluster_space", "neighbors",
                         "mn_ratio", "fp_ratio", "phase_iters", "learning_rate"},
                     "priors.");
      if (p.contains("enabled")) cfg.priors.enabled = p["enabled"].get<bool>();
      if (p.contains("epsilon")) cfg.priors.epsilon = p["epsilon"].get<double>();
      if (p.contains("k")) cfg.priors.k = p["k"].get<std::size_t>();
      if (p.contains("cluster_space")) {
        const auto s = p["cluster_space"].get<std::string>();
        if (s == "projection") {
          cfg.priors.space = ClusterSpace::projection;
        } else if (s == "embedding") {
          cfg.priors.space = ClusterSpace::embedding;
        } else {
          throw InputError("config: priors.cluster_space must be 'projection' or 'embedding'");
        }
      }
      if (p.contains("neighbors")) cfg.priors.projector.n_neighbors = p["neighbors"].get<int>();
      if (p.contains("mn_ratio")) cfg.priors.projector.mn_ratio = p["mn_ratio"].get<double>();
      if (p.contains("fp_ratio")) cfg.priors.projector.fp_ratio = p["fp_ratio"].get<double>();
      if (p.contains("phase_iters")) cfg.priors.projector.phase_iters = p["phase_iters"].get<std::array<int, 3>>();
      if (p.contains("learning_rate")) cfg.priors.projector.learning_rate = p["learning_rate"].get<double>();
      path_of(p, "embeddings", cfg.priors.embeddings);
      path_of(p, "registry", cfg.priors.registry);
    }
    if (doc.contains("output")) {
      const json& o = doc["output"];
      reject_unknown(o, {"submission", "report", "intermediates", "keep_intermediates"}, "output.");
      path_of(o, "submission", cfg.submission_out);
      path_of(o, "report", cfg.report_out);
      path_of(o, "intermediates", cfg.intermediates_dir);
      if (o.contains("keep_intermediates")) cfg.keep_intermediates = o["keep_intermediates"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: schema violation: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  RunConfig cfg;
  apply_config_json(cfg, csv::read_text(path), path.parent_path());
  return cfg;
}

// --- stages -----------------------------------------------------------------------------

std::vector<ImageTiles> group_by_image(std::vector<TilePrediction> tiles) {
  std::vector<ImageTiles> images;
  std::unordered_map<std::string, std::size_t> slot;
  for (auto& t : tiles) {
    auto [it, inserted] = slot.emplace(t.image_id, images.size());
    if (inserted) images.push_back(ImageTiles{t.image_id, {}});
    images[it->second].tiles.push_back(std::move(t));
  }
  for (auto& img : images) {
    std::sort(img.tiles.begin(), img.tiles.end(), [](const TilePrediction& a, const TilePrediction& b) {
      return std::pair{a.row, a.col} < std::pair{b.row, b.col};
    });
    for (std::size_t i = 1; i < img.tiles.size(); ++i) {
      if (img.tiles[i].row == img.tiles[i - 1].row && img.tiles[i].col == img.tiles[i - 1].col) {
        throw InputError("image '" + img.image_id + "' has two records for tile (" +
                         std::to_string(img.tiles[i].row) + ", " + std::to_string(img.tiles[i].col) + ")");
      }
    }
  }
  return images;
}

std::vector<TilePrediction> flatten(const std::vector<ImageTiles>& images) {
  std::vector<TilePrediction> out;
  for (const auto& img : images) out.insert(out.end(), img.tiles.begin(), img.tiles.end());
  return out;
}

void check_grid_coverage(const std::vector<ImageTiles>& images, GridSpec grid) {
  for (const auto& img : images) {
    for (const auto& t : img.tiles) {
      if (t.row >= grid.rows || t.col >= grid.cols) {
        throw InputError("image '" + img.image_id + "': tile (" + std::to_string(t.row) + ", " +
                         std::to_string(t.col) + ") lies outside the " + std::to_string(grid.rows) +
                         "x" + std::to_string(grid.cols) + " grid");
      }
    }
    if (img.tiles.size() != static_cast<std::size_t>(grid.tile_count())) {
      throw InputError("image '" + img.image_id + "' has " + std::to_string(img.tiles.size()) +
                       " tiles, expected " + std::to_string(grid.tile_count()));
    }
  }
}

std::vector<std::pair<std::string, std::vector<TileRect>>> plan_tiles(
    const std::vector<QuadratRecord>& quadrats, GridSpec grid) {
  std::vector<std::pair<std::string, std::vector<TileRect>>> plans;
  plans.reserve(quadrats.size());
  for (const auto& q : quadrats) {
    try {
      plans.emplace_back(q.quadrat_id, make_grid(q.width_px, q.height_px, grid));
    } catch (const InputError& e) {
      throw InputError("quadrat '" + q.quadrat_id + "': " + e.what());
    }
  }
  return plans;
}

std::vector<ImageTiles> mask_tiles(const std::vector<ImageTiles>& images, const SpeciesMask& mask,
                                   bool renormalize, int threads) {
  std::vector<ImageTiles> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    out[i] = images[i];
    for (auto& t : out[i].tiles) {
      SparseProbs kept = apply_mask(t.probs, mask, renormalize);
      if (kept.empty() && !t.probs.empty()) kept = top_k_of_tile(t, 1);
      t.probs = std::move(kept);
      t.dense_complete = false;
    }
  });
  return out;
}

std::vector<double> image_vector(const ImageTiles& image, std::size_t species_count) {
  std::vector<double> v(species_count, 0.0);
  for (const auto& t : image.tiles) {
    for (const auto& e : t.probs) v.at(e.index) += e.prob;
  }
  const double n = static_cast<double>(std::max<std::size_t>(image.tiles.size(), 1));
  double total = 0.0;
  for (auto& x : v) {
    x /= n;
    total += x;
  }
  if (!(total > 0.0)) throw InvariantError("image '" + image.image_id + "' has no probability mass");
  for (auto& x : v) x /= total;
  return v;
}

ClusterPriors priors_from_tiles(const std::vector<ImageTiles>& images, const Assignments& assignments,
                                std::size_t cluster_count, double epsilon,
                                std::size_t species_count) {
  std::unordered_map<std::string, ClusterId> cluster_of;
  for (std::size_t i = 0; i < assignments.image_ids.size(); ++i) {
    cluster_of.emplace(assignments.image_ids[i], assignments.clusters[i]);
  }
  std::vector<std::vector<double>> vectors;
  std::vector<ClusterId> clusters;
  vectors.reserve(images.size());
  for (const auto& img : images) {
    auto it = cluster_of.find(img.image_id);
    if (it == cluster_of.end()) {
      throw InputError("image '" + img.image_id + "' has no cluster assignment");
    }
    vectors.push_back(image_vector(img, species_count));
    clusters.push_back(it->second);
  }
  return estimate_priors(vectors, clusters, cluster_count, epsilon, species_count);
}

std::vector<ImageTiles> reweight_tiles(const std::vector<ImageTiles>& images,
                                       const ClusterPriors& priors,
                                       const RegionClusterMap& region_map,
                                       const RegionRegistry& registry, int threads) {
  std::vector<ImageTiles> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const std::string& region = parse_region(images[i].image_id, registry);
    auto it = region_map.find(region);
    if (it == region_map.end()) {
      throw InputError("region '" + region + "' of image '" + images[i].image_id +
                       "' has no dominant cluster");
    }
    if (it->second >= priors.cluster_count()) {
      throw InputError("cluster " + std::to_string(it->second) + " has no prior");
    }
    const auto& prior = priors.priors[it->second];
    out[i] = images[i];
    for (auto& t : out[i].tiles) {
      t.probs = reweight(t.probs, prior);
      t.dense_complete = false;
    }
  });
  return out;
}

std::vector<SubmissionRow> aggregate_images(const std::vector<ImageTiles>& images, std::size_t k,
                                            int min_votes, std::size_t max_labels,
                                            const SpeciesCatalog& catalog, int threads) {
  std::vector<SubmissionRow> rows(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const VoteTally tally = tally_votes(images[i].tiles, k);
    if (tally.empty()) throw InvariantError("image '" + images[i].image_id + "' has no tallied species");
    rows[i].quadrat_id = images[i].image_id;
    for (auto idx : select_labels(tally, min_votes, max_labels)) {
      rows[i].species_ids.push_back(catalog.species_id(idx));
    }
  });
  std::sort(rows.begin(), rows.end(),
            [](const SubmissionRow& a, const SubmissionRow& b) { return a.quadrat_id < b.quadrat_id; });
  return rows;
}

std::vector<SubmissionRow> baseline_submission(std::vector<std::string> quadrat_ids,
                                               std::span<const std::uint64_t> training_counts,
                                               std::size_t k, const SpeciesCatalog& catalog) {
  std::vector<SpeciesId> species;
  for (auto idx : naive_baseline(training_counts, k)) species.push_back(catalog.species_id(idx));
  std::sort(quadrat_ids.begin(), quadrat_ids.end());
  quadrat_ids.erase(std::unique(quadrat_ids.begin(), quadrat_ids.end()), quadrat_ids.end());
  std::vector<SubmissionRow> rows;
  rows.reserve(quadrat_ids.size());
  for (auto& q : quadrat_ids) rows.push_back({std::move(q), species});
  return rows;
}

ClusterStage cluster_projection(Projection projection, std::size_t k, std::uint64_t seed,
                                const RegionRegistry& registry) {
  ClusterStage stage;
  const ClusterModel model = kmeans(projection.points, k, seed);
  std::vector<std::string> regions;
  regions.reserve(projection.image_ids.size());
  for (const auto& id : projection.image_ids) regions.push_back(parse_region(id, registry));
  stage.region_map = dominant_cluster(model.assignments, regions);
  stage.assignments = Assignments{projection.image_ids, model.assignments};
  stage.projection = std::move(projection);
  return stage;
}

ClusterStage cluster_images(const EmbeddingMatrix& embeddings, const PriorsConfig& cfg,
                            std::uint64_t seed, const RegionRegistry& registry) {
  ProjectorConfig pc = cfg.projector;
  pc.seed = seed;
  Projection projection = fit(embeddings, pc);
  if (cfg.space == ClusterSpace::projection) {
    return cluster_projection(std::move(projection), cfg.k, seed, registry);
  }
  const EmbeddingMatrix prepared = preprocess(embeddings);
  Projection full;
  full.image_ids = prepared.image_ids;
  full.points = prepared.data;
  ClusterStage stage = cluster_projection(std::move(full), cfg.k, seed, registry);
  stage.projection = std::move(projection);
  return stage;
}

std::map<std::string, LabelSet> predictions_of(std::span<const SubmissionRow> rows) {
  std::map<std::string, LabelSet> out;
  for (const auto& r : rows) out[r.quadrat_id] = LabelSet(r.species_ids.begin(), r.species_ids.end());
  return out;
}

RunResult run(const RunConfig& cfg) {
  in_stage("config", [&] { cfg.validate(); });
  const SpeciesCatalog catalog = in_stage("catalog", [&] { return load_catalog(cfg.catalog); });
  const std::size_t species_count = catalog.size();
  const std::size_t k = cfg.resolved_k();
  TransectRule rule{cfg.transect_delimiter, {}};
  if (!cfg.transect_map.empty()) {
    rule.explicit_map = in_stage("catalog", [&] { return load_transect_map(cfg.transect_map); });
  }
  const RegionRegistry registry = in_stage("catalog", [&] { return registry_for(cfg.priors); });

  RunResult result;
  if (cfg.mode == PipelineMode::baseline) {
    result.submission = in_stage("baseline", [&] {
      const auto counts = read_training_counts(cfg.training_counts, catalog);
      std::vector<std::string> ids;
      if (!cfg.tiles.empty()) {
        for (const auto& img : group_by_image(read_tile_predictions(cfg.tiles, species_count))) {
          ids.push_back(img.image_id);
        }
      } else if (!cfg.truth.empty()) {
        for (const auto& e : read_ground_truth(cfg.truth, rule).entries()) ids.push_back(e.quadrat_id);
      } else if (!cfg.quadrats.empty()) {
        for (const auto& q : load_quadrats(cfg.quadrats, registry, rule)) ids.push_back(q.quadrat_id);
      } else {
        throw InputError("baseline mode needs tiles, truth or quadrats to list the images");
      }
      return baseline_submission(std::move(ids), counts, k, catalog);
    });
  } else {
    const GridSpec grid = cfg.effective_grid();
    std::vector<ImageTiles> images = in_stage("tiler", [&] {
      auto grouped = group_by_image(read_tile_predictions(cfg.tiles, species_count));
      if (grouped.empty()) throw InputError(cfg.tiles.string() + ": no tile predictions");
      check_grid_coverage(grouped, grid);
      if (!cfg.quadrats.empty()) {
        const auto records = load_quadrats(cfg.quadrats, registry, rule);
        std::set<std::string> known;
        for (const auto& r : records) known.insert(r.quadrat_id);
        for (const auto& img : grouped) {
          if (!known.count(img.image_id)) {
            throw InputError("image '" + img.image_id + "' is missing from " + cfg.quadrats.string());
          }
        }
        std::string plan;
        for (const auto& [id, rects] : plan_tiles(records, grid)) plan += format_tile_plan(rects, id);
        stage_output(cfg, "tile_plan.ndjson", plan);
      }
      return grouped;
    });

    if (cfg.geo.enabled) {
      images = in_stage("geofilter", [&] {
        const auto observations = read_observations(cfg.geo.observations);
        const auto regions = read_geo_regions(cfg.geo.regions);
        const SpeciesMask mask =
            build_mask(nearest_by_species(observations, cfg.geo.reference), regions, catalog);
        if (mask.allowed_count == 0) throw InvariantError("geolocation mask admits no species");
        auto masked = mask_tiles(images, mask, cfg.geo.renormalize, cfg.threads);
        stage_output(cfg, "mask.csv", format_mask(mask, catalog));
        stage_output(cfg, "tiles_masked.ndjson", format_tile_predictions(flatten(masked)));
        return masked;
      });
    }

    if (cfg.priors.enabled) {
      images = in_stage("priors", [&] {
        const EmbeddingMatrix embeddings = read_embeddings(cfg.priors.embeddings);
        const ClusterStage stage = cluster_images(embeddings, cfg.priors, cfg.seed, registry);
        const ClusterPriors priors =
            priors_from_tiles(images, stage.assignments, cfg.priors.k, cfg.priors.epsilon, species_count);
        auto reweighted = reweight_tiles(images, priors, stage.region_map, registry, cfg.threads);
        stage_output(cfg, "projection.csv", format_projection(stage.projection));
        stage_output(cfg, "assignments.csv",
                     format_assignments(stage.assignments.image_ids, stage.assignments.clusters));
        stage_output(cfg, "region_clusters.csv", format_region_clusters(stage.region_map));
        stage_output(cfg, "priors.ndjson", format_priors(priors));
        stage_output(cfg, "tiles_reweighted.ndjson", format_tile_predictions(flatten(reweighted)));
        return reweighted;
      });
    }

    result.submission = in_stage("aggregator", [&] {
      return aggregate_images(images, k, cfg.min_votes, cfg.max_labels, catalog, cfg.threads);
    });
  }

  in_stage("submission", [&] {
    if (!cfg.submission_out.empty()) write_submission(result.submission, cfg.submission_out);
  });
  if (!cfg.truth.empty()) {
    result.report = in_stage("evaluator", [&] {
      return final_score(predictions_of(result.submission), read_ground_truth(cfg.truth, rule));
    });
    if (!cfg.report_out.empty()) csv::write_text(cfg.report_out, format_report(*result.report));
  }
  return result;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const fs::path& whole_image_tiles) {
  if (base.truth.empty()) throw InputError("ablation needs ground truth");
  RunConfig plain = base;
  plain.submission_out.clear();
  plain.report_out.clear();
  plain.keep_intermediates = false;
  plain.geo.enabled = false;
  plain.priors.enabled = false;
  plain.k_per_tile.reset();

  std::vector<AblationRow> rows;
  auto score_of = [](RunConfig cfg) { return run(cfg).report->final_score; };
  const std::string grid_label = std::to_string(base.grid.rows) + "x" + std::to_string(base.grid.cols);

  if (!base.training_counts.empty()) {
    for (std::size_t k : {5, 10, 25}) {
      RunConfig cfg = plain;
      cfg.mode = PipelineMode::baseline;
      cfg.k_per_tile = k;
      rows.push_back({"Naive baseline", k, "-", score_of(cfg)});
    }
  }
  if (!whole_image_tiles.empty()) {
    RunConfig cfg = plain;
    cfg.mode = PipelineMode::no_tiling;
    cfg.tiles = whole_image_tiles;
    cfg.k_per_tile = 20;
    rows.push_back({"ViT", 20, "-", score_of(cfg)});
  }
  if (!base.tiles.empty()) {
    for (std::size_t k : {20, 12, 10, 9}) {
      RunConfig cfg = plain;
      cfg.mode = PipelineMode::tiling;
      cfg.k_per_tile = k;
      rows.push_back({"ViT", k, grid_label, score_of(cfg)});
    }
    if (!base.geo.regions.empty() && !base.geo.observations.empty()) {
      RunConfig cfg = plain;
      cfg.mode = PipelineMode::tiling;
      cfg.geo = base.geo;
      cfg.geo.enabled = true;
      cfg.k_per_tile = 10;
      rows.push_back({"ViT + GEO", 10, grid_label, score_of(cfg)});
    }
    if (!base.priors.embeddings.empty()) {
      RunConfig cfg = plain;
      cfg.mode = PipelineMode::tiling;
      cfg.priors = base.priors;
      cfg.priors.enabled = true;
      cfg.k_per_tile = 9;
      rows.push_back({"ViT + PRIORS", 9, grid_label, score_of(cfg)});
    }
  }
  return rows;
}

std::string format_ablation(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out << "method,top_k,tiles,final_score\n";
  for (const auto& r : rows) {
    out << r.method << ",top-" << r.top_k << "," << r.tiles << "," << csv::format_double(r.score) << "\n";
  }
  return out.str();
}

}  // namespace quadrat
