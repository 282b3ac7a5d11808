#include <doctest.h>

#include <filesystem>
#include <regex>
#include <set>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"
#include "quadrat/pipeline.hpp"
#include "quadrat/plot.hpp"
#include "quadrat/synth.hpp"

using namespace quadrat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "quadrat_unit" / "pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A bundle on disk plus its parsed config.
struct World {
  fs::path dir;
  SynthParams params;
  RunConfig cfg;
};

World make_world(const std::string& name, SynthParams params = {}) {
  World w{fresh_dir(name), params, {}};
  write_bundle(synth(params), params, w.dir);
  w.cfg = load_run_config(w.dir / "config.json");
  return w;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(parse_mode("no-tiling") == PipelineMode::no_tiling);
  CHECK(to_string(PipelineMode::baseline) == "baseline");
  CHECK_THROWS_AS(parse_mode("tiles"), InputError);
}

TEST_CASE("config json overlays and resolves paths") {
  RunConfig cfg;
  apply_config_json(cfg, R"({"mode": "baseline", "grid": "3x3", "k_per_tile": 5, "catalog": "c.csv",
                             "training_counts": "/abs/t.csv", "geo": {"ref_lat": 10},
                             "output": {"submission": "out/s.csv"}})",
                    "/base");
  CHECK(cfg.mode == PipelineMode::baseline);
  CHECK(cfg.grid == GridSpec{3, 3});
  CHECK(cfg.resolved_k() == 5);
  CHECK(cfg.catalog == fs::path("/base/c.csv"));
  CHECK(cfg.training_counts == fs::path("/abs/t.csv"));
  CHECK(cfg.geo.reference.lat == 10.0);
  CHECK(cfg.geo.reference.lon == 4.0);
  CHECK(cfg.submission_out == fs::path("/base/out/s.csv"));

  CHECK_THROWS_AS(apply_config_json(cfg, R"({"colour": 1})", ""), InputError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"priors": {"kk": 1}})", ""), InputError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"min_votes": "two"})", ""), InputError);
  CHECK_THROWS_AS(apply_config_json(cfg, "[1]", ""), InputError);
  CHECK_THROWS_AS(apply_config_json(cfg, "{", ""), InputError);
}

TEST_CASE("per-mode top-k defaults") {
  RunConfig cfg;
  CHECK(cfg.resolved_k() == 9);
  cfg.geo.enabled = true;
  CHECK(cfg.resolved_k() == 10);
  cfg.priors.enabled = true;
  CHECK(cfg.resolved_k() == 9);
  cfg.mode = PipelineMode::no_tiling;
  CHECK(cfg.resolved_k() == 20);
  CHECK(cfg.effective_grid() == GridSpec{1, 1});
  cfg.mode = PipelineMode::baseline;
  CHECK(cfg.resolved_k() == 10);
}

TEST_CASE("config validation") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.catalog = "c.csv";
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.tiles = "t.ndjson";
  CHECK_NOTHROW(cfg.validate());
  cfg.geo.enabled = true;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.geo.enabled = false;
  cfg.mode = PipelineMode::baseline;
  cfg.training_counts = "n.csv";
  CHECK_NOTHROW(cfg.validate());
  cfg.priors.enabled = true;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("grouping and coverage checks") {
  std::vector<TilePrediction> tiles{{"b", 0, 1, {{0, 1.0}}, false}, {"a", 0, 0, {{0, 1.0}}, false},
                                    {"b", 0, 0, {{1, 1.0}}, false}};
  const auto images = group_by_image(tiles);
  REQUIRE(images.size() == 2);
  CHECK(images[0].image_id == "b");
  CHECK(images[0].tiles[0].col == 0);
  CHECK_THROWS_AS(check_grid_coverage(images, {1, 2}), InputError);
  CHECK_NOTHROW(check_grid_coverage({images[0]}, {1, 2}));
  CHECK_THROWS_AS(check_grid_coverage({images[0]}, {1, 1}), InputError);
  tiles.push_back({"b", 0, 1, {{0, 1.0}}, false});
  CHECK_THROWS_AS(group_by_image(tiles), InputError);
}

TEST_CASE("masking keeps a fallback label") {
  std::vector<ImageTiles> images{{"a", {{"a", 0, 0, {{1, 0.7}, {0, 0.3}}, true}}}};
  SpeciesMask mask = SpeciesMask::all(3);
  mask.allowed[0] = false;
  mask.allowed[1] = false;
  mask.allowed_count = 1;
  const auto out = mask_tiles(images, mask, false);
  CHECK(out[0].tiles[0].probs == SparseProbs{{1, 0.7}});
  mask.allowed[0] = true;
  CHECK(mask_tiles(images, mask, false)[0].tiles[0].probs == SparseProbs{{0, 0.3}});
}

TEST_CASE("image vector is the renormalised tile mean") {
  const ImageTiles img{"a", {{"a", 0, 0, {{0, 0.5}, {1, 0.3}}, false}, {"a", 0, 1, {{1, 0.2}}, false}}};
  const auto v = image_vector(img, 3);
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(0.5));
  CHECK(v[2] == 0.0);
}

TEST_CASE("baseline rows share the same species") {
  const auto catalog = SpeciesCatalog::from_ids({11, 12, 13, 14, 15, 16});
  const std::vector<std::uint64_t> counts{1, 9, 3, 8, 2, 7};
  const auto rows = baseline_submission({"q2", "q1", "q2"}, counts, 5, catalog);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].quadrat_id == "q1");
  for (const auto& r : rows) CHECK(r.species_ids == std::vector<SpeciesId>{12, 14, 16, 13, 15});
}

TEST_CASE("synthetic bundles are deterministic") {
  const auto a = make_world("det_a");
  const auto b = make_world("det_b");
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    const auto name = entry.path().filename();
    CHECK(csv::read_text(entry.path()) == csv::read_text(b.dir / name));
  }
  SynthParams other;
  other.seed = 43;
  const auto c = make_world("det_c", other);
  CHECK(csv::read_text(a.dir / "tiles.ndjson") != csv::read_text(c.dir / "tiles.ndjson"));
}

TEST_CASE("synthetic parameter checks") {
  SynthParams p;
  p.noise = 1.5;
  CHECK_THROWS_AS(synth(p), InputError);
  p = SynthParams{};
  p.images = 1;
  CHECK_THROWS_AS(synth(p), InputError);
  p = SynthParams{};
  p.min_species = 6;
  CHECK_THROWS_AS(synth(p), InputError);
}

TEST_CASE("noiseless world is recovered exactly") {
  SynthParams p;
  p.noise = 0.0;
  auto w = make_world("noiseless", p);
  w.cfg.priors.enabled = false;
  const auto result = run(w.cfg);
  REQUIRE(result.report);
  CHECK(result.report->final_score == 1.0);
}

TEST_CASE("generator clusters are recoverable from the embeddings") {
  const SynthParams p;
  const auto bundle = synth(p);
  PriorsConfig pc;
  const auto stage = cluster_images(bundle.embeddings, pc, 42, bundle.registry);
  CHECK(adjusted_rand_index(stage.assignments.clusters, bundle.generator_clusters) >= 0.9);
}

TEST_CASE("tiling beats no tiling and baseline on the synthetic world") {
  auto w = make_world("ordering");
  w.cfg.priors.enabled = false;
  const double tiled = run(w.cfg).report->final_score;
  RunConfig whole = w.cfg;
  whole.mode = PipelineMode::no_tiling;
  whole.tiles = w.dir / "tiles_whole.ndjson";
  const double untiled = run(whole).report->final_score;
  RunConfig base = w.cfg;
  base.mode = PipelineMode::baseline;
  const double naive = run(base).report->final_score;
  CHECK(naive < untiled);
  CHECK(untiled < tiled);
}

TEST_CASE("uniform priors leave the submission unchanged") {
  auto w = make_world("uniform_prior");
  const auto catalog = load_catalog(w.cfg.catalog);
  const auto images = group_by_image(read_tile_predictions(w.cfg.tiles, catalog.size()));
  const auto registry = RegionRegistry::plantclef_default();
  ClusterPriors uniform;
  uniform.priors.assign(3, std::vector<double>(catalog.size(), 1.0 / static_cast<double>(catalog.size())));
  RegionClusterMap map;
  for (const auto& name : registry.names()) map[name] = static_cast<ClusterId>(name.size() % 3);
  const auto reweighted = reweight_tiles(images, uniform, map, registry);
  CHECK(format_submission(aggregate_images(reweighted, 9, 2, 10, catalog)) ==
        format_submission(aggregate_images(images, 9, 2, 10, catalog)));
}

TEST_CASE("run writes every stage when asked") {
  auto w = make_world("intermediates");
  w.cfg.geo.enabled = true;
  w.cfg.keep_intermediates = true;
  const auto result = run(w.cfg);
  for (const char* name : {"tile_plan.ndjson", "mask.csv", "tiles_masked.ndjson", "projection.csv", "assignments.csv",
                           "region_clusters.csv", "priors.ndjson", "tiles_reweighted.ndjson"}) {
    CHECK_MESSAGE(fs::exists(w.dir / "intermediates" / name), name);
  }
  CHECK(fs::exists(w.dir / "submission.csv"));
  CHECK(fs::exists(w.dir / "report.json"));
  CHECK(read_submission(w.dir / "submission.csv") == result.submission);
  const auto catalog = load_catalog(w.cfg.catalog);
  CHECK(read_tile_predictions(w.dir / "intermediates" / "tiles_reweighted.ndjson", catalog.size()).size() == 1600);
  CHECK(read_priors(w.dir / "intermediates" / "priors.ndjson", catalog.size()).cluster_count() == 3);
}

TEST_CASE("stage errors name the stage") {
  auto w = make_world("stage_errors");
  csv::write_text(w.dir / "tiles.ndjson", "{\"image_id\":\"RNNB-T00-Q00\",\"row\":0,\"col\":0,\"probs\":[[99,0.5]]}\n");
  try {
    run(w.cfg);
    FAIL("expected a tiler error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.rfind("tiler: ", 0) == 0);
    CHECK(msg.find("tiles.ndjson:1") != std::string::npos);
  }
}

TEST_CASE("ablation grid") {
  auto w = make_world("ablation");
  const auto rows = run_ablation(w.cfg, w.dir / "tiles_whole.ndjson");
  REQUIRE(rows.size() == 10);
  CHECK(rows[0].method == "Naive baseline");
  CHECK(rows[3].tiles == "-");
  CHECK(rows[9].method == "ViT + PRIORS");
  CHECK(rows[9].top_k == 9);
  const auto text = format_ablation(rows);
  CHECK(text.rfind("method,top_k,tiles,final_score\n", 0) == 0);
  CHECK(count_of(text, "\n") == 11);
}

TEST_CASE("scatter plot structure") {
  Projection p;
  p.image_ids = {"a", "b", "c"};
  p.points.resize(3, 2);
  p.points << 0, 0, 1, 1, 2, 0.5;
  const auto svg = render_scatter_svg(p, {"x", "y", "z"});
  CHECK(count_of(svg, "<circle") == 3);
  CHECK(count_of(svg, "class=\"legend-entry\"") == 3);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);

  Projection same;
  same.points = Eigen::MatrixXd::Ones(4, 2);
  same.image_ids = {"1", "2", "3", "4"};
  const auto overlapping = render_scatter_svg(same, {"a", "a", "b", "b"});
  CHECK(count_of(overlapping, "<circle") == 4);
  CHECK(overlapping.find("nan") == std::string::npos);

  CHECK_THROWS_AS(render_scatter_svg(Projection{}, {}), InputError);
  CHECK_THROWS_AS(render_scatter_svg(p, {"x"}), InputError);
}

TEST_CASE("thirteen categories get thirteen colours") {
  Projection p;
  p.points.resize(13, 2);
  std::vector<std::string> labels;
  for (int i = 0; i < 13; ++i) {
    p.points.row(i) << i, -i;
    p.image_ids.push_back(std::to_string(i));
    labels.push_back("region" + std::to_string(100 + i));
  }
  const auto svg = render_scatter_svg(p, labels);
  std::set<std::string> colours;
  const std::regex fill("<circle[^>]*fill=\"(#[0-9a-f]{6})\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), fill); it != std::sregex_iterator(); ++it) {
    colours.insert((*it)[1]);
  }
  CHECK(colours.size() == 13);
  CHECK(palette_size() >= 13);
}
