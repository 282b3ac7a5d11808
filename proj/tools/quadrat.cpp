#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"
#include "quadrat/pipeline.hpp"
#include "quadrat/plot.hpp"
#include "quadrat/synth.hpp"

namespace fs = std::filesystem;
using namespace quadrat;

namespace {

constexpr const char* kConfigEnv = "QUADRAT_CONFIG";

void emit(const std::string& out, const std::string& bytes) {
  if (out.empty() || out == "-") {
    std::cout << bytes;
  } else {
    csv::write_text(out, bytes);
  }
}

RegionRegistry registry_from(const std::string& path) {
  return path.empty() ? RegionRegistry::plantclef_default() : load_region_registry(path);
}

std::vector<ImageTiles> read_images(const std::string& path, std::size_t species_count) {
  return group_by_image(read_tile_predictions(path, species_count));
}

std::array<int, 3> parse_iters(const std::string& text) {
  std::array<int, 3> out{};
  std::stringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i == 3) throw InputError("--iters expects three comma-separated counts");
    try {
      out[i++] = std::stoi(part);
    } catch (const std::exception&) {
      throw InputError("--iters: '" + part + "' is not an integer");
    }
  }
  if (i != 3) throw InputError("--iters expects three comma-separated counts");
  return out;
}

struct Options {
  // shared
  std::string catalog, tiles, out, grid = "4x4", registry, truth, transect_map, delimiter = "-";
  std::size_t k = 9;
  int min_votes = 2;
  std::size_t max_labels = 10;
  int threads = 1;
  std::uint64_t seed = 42;
  // tile-plan
  std::string quadrats;
  int width = 0, height = 0;
  // geofilter
  std::string observations, regions, tiles_out;
  double ref_lat = kDefaultReference.lat, ref_lon = kDefaultReference.lon;
  bool renormalize = false;
  // project
  std::string embeddings;
  int neighbors = 10;
  double mn_ratio = 0.5, fp_ratio = 2.0, learning_rate = 1.0;
  std::string iters = "100,100,250";
  // cluster / priors / reweight
  std::string projection, assignments, regions_out, priors, region_clusters, space = "projection";
  std::size_t clusters = 3;
  double epsilon = 1e-6;
  // evaluate
  std::string submission;
  // plot
  std::string color_by = "region", title;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiled multi-label species prediction pipeline"};
  app.require_subcommand(1);
  Options o;

  auto* tile_plan = app.add_subcommand("tile-plan", "Pixel grid of each quadrat as NDJSON");
  tile_plan->add_option("--quadrats", o.quadrats, "CSV quadrat_id,width_px,height_px");
  tile_plan->add_option("--width", o.width, "Single image width");
  tile_plan->add_option("--height", o.height, "Single image height");
  tile_plan->add_option("--grid", o.grid, "RxC")->capture_default_str();
  tile_plan->add_option("--registry", o.registry, "Region names, one per line");
  tile_plan->add_option("--delimiter", o.delimiter, "Transect delimiter")->capture_default_str();
  tile_plan->add_option("--out", o.out, "Output NDJSON (default stdout)");

  auto* aggregate = app.add_subcommand("aggregate", "Vote tile predictions into a submission");
  aggregate->add_option("--catalog", o.catalog)->required();
  aggregate->add_option("--tiles", o.tiles)->required();
  aggregate->add_option("--grid", o.grid)->capture_default_str();
  aggregate->add_option("--k", o.k, "Top-k per tile")->capture_default_str();
  aggregate->add_option("--min-votes", o.min_votes)->capture_default_str();
  aggregate->add_option("--max-labels", o.max_labels)->capture_default_str();
  aggregate->add_option("--threads", o.threads)->capture_default_str();
  aggregate->add_option("--out", o.out, "Submission CSV (default stdout)");

  auto* geofilter = app.add_subcommand("geofilter", "Species mask from the nearest observations");
  geofilter->add_option("--catalog", o.catalog)->required();
  geofilter->add_option("--observations", o.observations)->required();
  geofilter->add_option("--regions", o.regions, "GeoJSON-like region list")->required();
  geofilter->add_option("--ref-lat", o.ref_lat)->capture_default_str();
  geofilter->add_option("--ref-lon", o.ref_lon)->capture_default_str();
  geofilter->add_option("--tiles", o.tiles, "Tiles to mask");
  geofilter->add_option("--tiles-out", o.tiles_out, "Masked tiles NDJSON");
  geofilter->add_flag("--renormalize", o.renormalize);
  geofilter->add_option("--threads", o.threads)->capture_default_str();
  geofilter->add_option("--out", o.out, "Mask CSV (default stdout)");

  auto* project = app.add_subcommand("project", "2-D projection of image embeddings");
  project->add_option("--embeddings", o.embeddings)->required();
  project->add_option("--neighbors", o.neighbors)->capture_default_str();
  project->add_option("--mn-ratio", o.mn_ratio)->capture_default_str();
  project->add_option("--fp-ratio", o.fp_ratio)->capture_default_str();
  project->add_option("--iters", o.iters, "Phase lengths a,b,c")->capture_default_str();
  project->add_option("--lr", o.learning_rate)->capture_default_str();
  project->add_option("--seed", o.seed)->capture_default_str();
  project->add_option("--out", o.out, "Projection CSV (default stdout)");

  auto* cluster = app.add_subcommand("cluster", "K-Means over a projection and region->cluster map");
  cluster->add_option("--projection", o.projection)->required();
  cluster->add_option("--k", o.clusters)->capture_default_str();
  cluster->add_option("--seed", o.seed)->capture_default_str();
  cluster->add_option("--registry", o.registry);
  cluster->add_option("--out", o.out, "Assignments CSV (default stdout)");
  cluster->add_option("--regions-out", o.regions_out, "Region -> dominant cluster CSV");

  auto* priors = app.add_subcommand("priors", "Per-cluster species priors");
  priors->add_option("--catalog", o.catalog)->required();
  priors->add_option("--tiles", o.tiles)->required();
  priors->add_option("--assignments", o.assignments)->required();
  priors->add_option("--k", o.clusters)->capture_default_str();
  priors->add_option("--epsilon", o.epsilon)->capture_default_str();
  priors->add_option("--out", o.out, "Priors NDJSON (default stdout)");

  auto* reweight = app.add_subcommand("reweight", "Multiply tile probabilities by cluster priors");
  reweight->add_option("--catalog", o.catalog)->required();
  reweight->add_option("--tiles", o.tiles)->required();
  reweight->add_option("--priors", o.priors)->required();
  reweight->add_option("--region-clusters", o.region_clusters)->required();
  reweight->add_option("--registry", o.registry);
  reweight->add_option("--threads", o.threads)->capture_default_str();
  reweight->add_option("--out", o.out, "Tiles NDJSON (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Score a submission against ground truth");
  evaluate->add_option("--submission", o.submission)->required();
  evaluate->add_option("--truth", o.truth)->required();
  evaluate->add_option("--transect-map", o.transect_map);
  evaluate->add_option("--delimiter", o.delimiter)->capture_default_str();
  evaluate->add_option("--out", o.out, "Report JSON (default stdout)");

  auto* plot = app.add_subcommand("plot", "SVG scatter of a projection");
  plot->add_option("--projection", o.projection)->required();
  plot->add_option("--color-by", o.color_by, "region or cluster")->capture_default_str();
  plot->add_option("--assignments", o.assignments, "Needed for --color-by cluster");
  plot->add_option("--registry", o.registry);
  plot->add_option("--title", o.title);
  plot->add_option("--out", o.out, "SVG file (default stdout)");

  SynthParams sp;
  std::string synth_grid = "4x4";
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  synth_cmd->add_option("--out", o.out, "Bundle directory")->required();
  synth_cmd->add_option("--images", sp.images)->capture_default_str();
  synth_cmd->add_option("--species", sp.species)->capture_default_str();
  synth_cmd->add_option("--clusters", sp.clusters)->capture_default_str();
  synth_cmd->add_option("--grid", synth_grid)->capture_default_str();
  synth_cmd->add_option("--noise", sp.noise)->capture_default_str();
  synth_cmd->add_option("--min-species", sp.min_species)->capture_default_str();
  synth_cmd->add_option("--max-species", sp.max_species)->capture_default_str();
  synth_cmd->add_option("--dim", sp.embedding_dim)->capture_default_str();
  synth_cmd->add_option("--separation", sp.separation)->capture_default_str();
  synth_cmd->add_option("--per-transect", sp.quadrats_per_transect)->capture_default_str();
  synth_cmd->add_option("--seed", sp.seed)->capture_default_str();

  std::string config_path, run_mode, run_grid, submission_out, report_out, intermediates, whole_tiles,
      ablation_out;
  std::optional<std::size_t> run_k;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_threads;
  bool keep = false, ablation = false;
  std::optional<bool> geo_flag, priors_flag;
  auto* run_cmd = app.add_subcommand("run", "Run the configured pipeline end to end");
  run_cmd->add_option("--config", config_path, std::string("JSON config (default $") + kConfigEnv + ")");
  run_cmd->add_option("--mode", run_mode, "baseline, no-tiling or tiling");
  run_cmd->add_option("--grid", run_grid, "RxC");
  run_cmd->add_option("--k", run_k, "Top-k per tile");
  run_cmd->add_option("--seed", run_seed);
  run_cmd->add_option("--threads", run_threads);
  run_cmd->add_option("--geo", geo_flag, "Enable the geolocation mask (true/false)");
  run_cmd->add_option("--priors", priors_flag, "Enable cluster priors (true/false)");
  run_cmd->add_option("--submission", submission_out);
  run_cmd->add_option("--report", report_out);
  run_cmd->add_option("--intermediates", intermediates, "Directory for stage outputs");
  run_cmd->add_flag("--keep-intermediates", keep);
  run_cmd->add_flag("--ablation", ablation, "Run the ablation grid instead of a single pipeline");
  run_cmd->add_option("--whole-tiles", whole_tiles, "1x1 predictions for the ablation's no-tiling row");
  run_cmd->add_option("--ablation-out", ablation_out, "Ablation CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*tile_plan) {
      const GridSpec grid = parse_grid(o.grid);
      std::string bytes;
      if (!o.quadrats.empty()) {
        const auto records =
            load_quadrats(o.quadrats, registry_from(o.registry), TransectRule{o.delimiter, {}});
        for (const auto& [id, rects] : plan_tiles(records, grid)) bytes += format_tile_plan(rects, id);
      } else if (o.width > 0 && o.height > 0) {
        bytes = format_tile_plan(make_grid(o.width, o.height, grid));
      } else {
        throw InputError("tile-plan needs --quadrats or --width and --height");
      }
      emit(o.out, bytes);
    } else if (*aggregate) {
      const auto catalog = load_catalog(o.catalog);
      const auto images = read_images(o.tiles, catalog.size());
      check_grid_coverage(images, parse_grid(o.grid));
      if (o.k == 0) throw InputError("--k must be >= 1");
      emit(o.out, format_submission(aggregate_images(images, o.k, o.min_votes, o.max_labels, catalog, o.threads)));
    } else if (*geofilter) {
      const auto catalog = load_catalog(o.catalog);
      const auto mask = build_mask(nearest_by_species(read_observations(o.observations), {o.ref_lat, o.ref_lon}),
                                   read_geo_regions(o.regions), catalog);
      if (mask.allowed_count == 0) throw InvariantError("geolocation mask admits no species");
      if (!o.tiles.empty()) {
        if (o.tiles_out.empty()) throw InputError("--tiles needs --tiles-out");
        const auto masked = mask_tiles(read_images(o.tiles, catalog.size()), mask, o.renormalize, o.threads);
        csv::write_text(o.tiles_out, format_tile_predictions(flatten(masked)));
      }
      emit(o.out, format_mask(mask, catalog));
    } else if (*project) {
      ProjectorConfig pc;
      pc.n_neighbors = o.neighbors;
      pc.mn_ratio = o.mn_ratio;
      pc.fp_ratio = o.fp_ratio;
      pc.phase_iters = parse_iters(o.iters);
      pc.learning_rate = o.learning_rate;
      pc.seed = o.seed;
      pc.validate();
      emit(o.out, format_projection(fit(read_embeddings(o.embeddings), pc)));
    } else if (*cluster) {
      if (o.clusters == 0) throw InputError("--k must be >= 1");
      const auto stage = cluster_projection(read_projection(o.projection), o.clusters, o.seed, registry_from(o.registry));
      if (!o.regions_out.empty()) csv::write_text(o.regions_out, format_region_clusters(stage.region_map));
      emit(o.out, format_assignments(stage.assignments.image_ids, stage.assignments.clusters));
    } else if (*priors) {
      if (o.clusters == 0) throw InputError("--k must be >= 1");
      const auto catalog = load_catalog(o.catalog);
      const auto images = read_images(o.tiles, catalog.size());
      emit(o.out, format_priors(priors_from_tiles(images, read_assignments(o.assignments), o.clusters, o.epsilon,
                                                  catalog.size())));
    } else if (*reweight) {
      const auto catalog = load_catalog(o.catalog);
      const auto images = read_images(o.tiles, catalog.size());
      const auto out = reweight_tiles(images, read_priors(o.priors, catalog.size()),
                                      read_region_clusters(o.region_clusters), registry_from(o.registry), o.threads);
      emit(o.out, format_tile_predictions(flatten(out)));
    } else if (*evaluate) {
      TransectRule rule{o.delimiter, {}};
      if (!o.transect_map.empty()) rule.explicit_map = load_transect_map(o.transect_map);
      const auto report = final_score(predictions_of(read_submission(o.submission)), read_ground_truth(o.truth, rule));
      if (!o.out.empty() && o.out != "-") {
        csv::write_text(o.out, format_report(report));
        std::cout << "final_score " << csv::format_double(report.final_score) << "\n";
      } else {
        std::cout << format_report(report);
      }
    } else if (*plot) {
      const Projection projection = read_projection(o.projection);
      std::vector<std::string> labels;
      if (o.color_by == "region") {
        const auto registry = registry_from(o.registry);
        for (const auto& id : projection.image_ids) labels.push_back(parse_region(id, registry));
      } else if (o.color_by == "cluster") {
        if (o.assignments.empty()) throw InputError("--color-by cluster needs --assignments");
        const auto a = read_assignments(o.assignments);
        std::map<std::string, ClusterId> of;
        for (std::size_t i = 0; i < a.image_ids.size(); ++i) of.emplace(a.image_ids[i], a.clusters[i]);
        for (const auto& id : projection.image_ids) {
          auto it = of.find(id);
          if (it == of.end()) throw InputError("image '" + id + "' has no cluster assignment");
          labels.push_back("cluster " + std::to_string(it->second + 1));
        }
      } else {
        throw InputError("--color-by must be 'region' or 'cluster'");
      }
      PlotOptions po;
      po.title = o.title;
      emit(o.out, render_scatter_svg(projection, labels, po));
    } else if (*synth_cmd) {
      sp.grid = parse_grid(synth_grid);
      const SynthBundle bundle = synth(sp);
      write_bundle(bundle, sp, o.out);
    } else if (*run_cmd) {
      if (config_path.empty()) {
        if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') config_path = env;
      }
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      if (!run_mode.empty()) cfg.mode = parse_mode(run_mode);
      if (!run_grid.empty()) cfg.grid = parse_grid(run_grid);
      if (run_k) cfg.k_per_tile = *run_k;
      if (run_seed) cfg.seed = *run_seed;
      if (run_threads) cfg.threads = *run_threads;
      if (geo_flag) cfg.geo.enabled = *geo_flag;
      if (priors_flag) cfg.priors.enabled = *priors_flag;
      if (!submission_out.empty()) cfg.submission_out = submission_out;
      if (!report_out.empty()) cfg.report_out = report_out;
      if (!intermediates.empty()) cfg.intermediates_dir = intermediates;
      if (keep) cfg.keep_intermediates = true;
      if (ablation) {
        emit(ablation_out, format_ablation(run_ablation(cfg, whole_tiles)));
      } else {
        const RunResult result = run(cfg);
        if (cfg.submission_out.empty()) std::cout << format_submission(result.submission);
        if (result.report) {
          std::cerr << "final_score " << csv::format_double(result.report->final_score) << "\n";
        }
      }
    }
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
