// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "quadrat/csv.hpp"
#include "quadrat/pipeline.hpp"
#include "quadrat/synth.hpp"
#include "support/oracles.hpp"

using namespace quadrat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: no limit
  std::function<Outcome()> check;
};

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "quadrat_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v) { return csv::format_double(v); }

Outcome leaderboard_statement() {
  const fs::path readme = fs::path(QUADRAT_DATA_DIR).parent_path() / "README.md";
  if (!fs::exists(readme)) return {false, "README.md missing"};
  const std::string text = csv::read_text(readme);
  const bool stated = text.find("0.34834") != std::string::npos && text.find("not reproducible") != std::string::npos;
  return {stated, stated ? "README states that leaderboard scores need the hidden test set"
                         : "README lacks the non-reproducibility statement"};
}

Outcome metric_oracle() {
  bool ok = image_f1(LabelSet{1, 2, 5}, LabelSet{1, 2, 6}) == 2.0 / 3.0;
  const auto two = GroundTruth::from_entries({{"q1", "t", {1}}, {"q2", "t", {2}}});
  ok = ok && final_score({{"q1", {1}}, {"q2", {3}}}, two).final_score == 0.5;
  std::vector<GroundTruthEntry> weighted{{"a", "A", {1}}};
  std::map<std::string, LabelSet> wp{{"a", {1}}};
  for (int i = 0; i < 99; ++i) {
    weighted.push_back({"b" + std::to_string(i), "B", {1}});
    wp["b" + std::to_string(i)] = {2};
  }
  ok = ok && final_score(wp, GroundTruth::from_entries(weighted)).final_score == 0.5;
  if (!ok) return {false, "hand cases failed"};

  oracle::Rng rng(1001);
  double worst = 0.0;
  for (int round = 0; round < 200; ++round) {
    std::vector<oracle::FlatImage> flat;
    std::vector<GroundTruthEntry> entries;
    std::map<std::string, LabelSet> preds;
    const int transects = oracle::uniform_int(rng, 1, 10);
    int serial = 0;
    for (int t = 0; t < transects; ++t) {
      const int images = oracle::uniform_int(rng, 1, 20);
      for (int i = 0; i < images; ++i) {
        oracle::FlatImage img;
        img.quadrat = "q" + std::to_string(serial++);
        img.transect = "t" + std::to_string(t);
        for (int s = oracle::uniform_int(rng, 1, 8); s > 0; --s) img.truth.push_back(oracle::uniform_int(rng, 0, 49));
        img.predicted = oracle::uniform_int(rng, 0, 19) > 0;
        for (int s = oracle::uniform_int(rng, 0, 8); s > 0; --s) img.prediction.push_back(oracle::uniform_int(rng, 0, 49));
        if (img.predicted) preds[img.quadrat] = img.prediction;
        entries.push_back({img.quadrat, img.transect, img.truth});
        flat.push_back(img);
      }
    }
    const double got = final_score(preds, GroundTruth::from_entries(entries)).final_score;
    worst = std::max(worst, std::abs(got - oracle::flat_final_score(flat)));
  }
  return {worst <= 1e-12, "200 instances, max |diff| = " + fmt(worst)};
}

Outcome aggregation_oracle() {
  oracle::Rng rng(2002);
  int mismatches = 0, vote_ties = 0, mass_ties = 0, fallbacks = 0;
  for (int round = 0; round < 200; ++round) {
    const std::size_t species = 2 + rng() % 10;
    const int tiles_n = oracle::uniform_int(rng, 1, 16);
    std::vector<TilePrediction> tiles;
    for (int t = 0; t < tiles_n; ++t) tiles.push_back(oracle::random_tile(rng, "img", species, 1 + rng() % species));
    const std::size_t k = 1 + rng() % 9;
    const int min_votes = oracle::uniform_int(rng, 1, 4);
    const std::size_t max_labels = 1 + rng() % 10;
    const auto tally = tally_votes(tiles, k);
    const auto brute = oracle::brute_tally(tiles, k);
    bool same = tally.entries.size() == brute.votes.size();
    for (const auto& e : tally.entries) {
      same = same && brute.votes.count(e.index) && e.votes == brute.votes.at(e.index) && e.mass == brute.mass.at(e.index);
    }
    same = same && select_labels(tally, min_votes, max_labels) == oracle::brute_select(brute, min_votes, max_labels);
    mismatches += same ? 0 : 1;

    bool any_eligible = false;
    for (const auto& a : tally.entries) {
      any_eligible = any_eligible || a.votes >= min_votes;
      for (const auto& b : tally.entries) {
        if (a.index < b.index && a.votes == b.votes) {
          ++vote_ties;
          if (a.mass == b.mass) ++mass_ties;
        }
      }
    }
    fallbacks += any_eligible ? 0 : 1;
  }
  const bool covered = vote_ties > 0 && mass_ties > 0 && fallbacks > 0;
  return {mismatches == 0 && covered, "200 tile sets, mismatches " + std::to_string(mismatches) + ", vote ties " +
                                          std::to_string(vote_ties) + ", full ties " + std::to_string(mass_ties) +
                                          ", fallbacks " + std::to_string(fallbacks)};
}

Outcome tiler_suite() {
  const auto paper = make_grid(2000, 2000, {4, 4});
  bool ok = paper.size() == 16 &&
            std::all_of(paper.begin(), paper.end(), [](const TileRect& t) { return t.width() == 500 && t.height() == 500; });
  if (!ok) return {false, "2000x2000 / 4x4 is not sixteen 500x500 tiles"};
  oracle::Rng rng(3003);
  int failures = 0;
  for (int round = 0; round < 500; ++round) {
    const int rows = oracle::uniform_int(rng, 1, 8);
    const int cols = oracle::uniform_int(rng, 1, 8);
    const int w = oracle::uniform_int(rng, cols, 400);
    const int h = oracle::uniform_int(rng, rows, 400);
    const auto tiles = make_grid(w, h, {rows, cols});
    std::vector<unsigned char> cover(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    int min_w = w, max_w = 0, min_h = h, max_h = 0;
    bool good = tiles.size() == static_cast<std::size_t>(rows * cols);
    for (const auto& t : tiles) {
      good = good && 0 <= t.x0 && t.x0 < t.x1 && t.x1 <= w && 0 <= t.y0 && t.y0 < t.y1 && t.y1 <= h;
      min_w = std::min(min_w, t.width());
      max_w = std::max(max_w, t.width());
      min_h = std::min(min_h, t.height());
      max_h = std::max(max_h, t.height());
      for (int y = t.y0; y < t.y1; ++y) {
        for (int x = t.x0; x < t.x1; ++x) ++cover[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
      }
    }
    good = good && std::all_of(cover.begin(), cover.end(), [](unsigned char c) { return c == 1; });
    good = good && max_w - min_w <= 1 && max_h - min_h <= 1;
    failures += good ? 0 : 1;
  }
  return {failures == 0, "500 random grids, failures " + std::to_string(failures)};
}

Outcome gradient_check() {
  oracle::Rng rng(4004);
  double worst = 0.0;
  for (int round = 0; round < 50; ++round) {
    const auto n = static_cast<std::uint32_t>(oracle::uniform_int(rng, 2, 30));
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) << oracle::uniform_real(rng, -4, 4), oracle::uniform_real(rng, -4, 4);
    const auto pairs = oracle::random_pairs(rng, n, 2 * n + 1);
    const PhaseWeights w{oracle::uniform_real(rng, 0.5, 2), oracle::uniform_real(rng, 0, 1000), oracle::uniform_real(rng, 0.5, 2)};
    const Eigen::MatrixXd analytic = loss_and_grad(y, pairs, w).grad;
    const Eigen::MatrixXd numeric = oracle::central_difference(y, pairs, w, 1e-5);
    worst = std::max(worst, (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), 1e-12}));
  }
  return {worst < 1e-4, "50 instances, max relative error " + fmt(worst)};
}

Outcome blob_recovery() {
  const auto blobs = oracle::gaussian_blobs(300, 50, 3, 10.0, 42);
  ProjectorConfig cfg;
  cfg.seed = 42;
  const auto projection = fit(blobs.x, cfg);
  const auto model = kmeans(projection.points, 3, 42);
  const double ari = adjusted_rand_index(model.assignments, blobs.labels);
  return {ari >= 0.9, "ARI " + fmt(ari)};
}

Outcome kmeans_suite() {
  oracle::Rng rng(5005);
  int violations = 0;
  for (int round = 0; round < 100; ++round) {
    const int n = oracle::uniform_int(rng, 3, 80);
    const int k = oracle::uniform_int(rng, 1, std::min(n, 8));
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) pts.row(i) << oracle::uniform_real(rng, -5, 5), oracle::uniform_real(rng, -5, 5);
    const auto model = kmeans(pts, static_cast<std::size_t>(k), static_cast<std::uint64_t>(round));
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i) {
      if (model.inertia_history[i] > model.inertia_history[i - 1]) ++violations;
    }
  }
  double worst = 0.0;
  for (int round = 0; round < 20; ++round) {
    const int n = oracle::uniform_int(rng, 1, 200);
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) pts.row(i) << oracle::uniform_real(rng, -100, 100), oracle::uniform_real(rng, -1, 1);
    const auto model = kmeans(pts, 1, static_cast<std::uint64_t>(round));
    worst = std::max(worst, (model.centroids.row(0) - pts.colwise().mean()).cwiseAbs().maxCoeff());
  }
  return {violations == 0 && worst <= 1e-12,
          "100 instances, increases " + std::to_string(violations) + ", k=1 max |centroid - mean| " + fmt(worst)};
}

Outcome prior_identity() {
  oracle::Rng rng(6006);
  int order_breaks = 0;
  double worst = 0.0;
  for (int round = 0; round < 1000; ++round) {
    const std::size_t species = 2 + rng() % 60;
    const auto t = oracle::random_tile(rng, "x", species, 1 + rng() % species);
    const std::vector<double> uniform(species, 1.0 / static_cast<double>(species));
    const auto out = reweight(t.probs, uniform);
    double total = 0.0;
    bool same = out.size() == t.probs.size();
    for (std::size_t i = 0; same && i < out.size(); ++i) {
      same = out[i].index == t.probs[i].index;
      total += out[i].prob;
    }
    order_breaks += same ? 0 : 1;
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {order_breaks == 0 && worst <= 1e-9,
          "1000 vectors, argsort changes " + std::to_string(order_breaks) + ", max |sum - 1| " + fmt(worst)};
}

Outcome geofilter_oracle() {
  oracle::Rng rng(7007);
  int mismatches = 0, boundary_hits = 0;
  for (int world = 0; world < 100; ++world) {
    const int species = oracle::uniform_int(rng, 3, 30);
    std::vector<SpeciesId> ids;
    for (int s = 0; s < species; ++s) ids.push_back(500 + s);
    const auto catalog = SpeciesCatalog::from_ids(ids);
    std::vector<std::vector<LatLon>> polys;
    std::vector<GeoRegion> regions;
    for (int r = oracle::uniform_int(rng, 1, 3); r > 0; --r) {
      const LatLon centre{static_cast<double>(oracle::uniform_int(rng, -20, 20)),
                          static_cast<double>(oracle::uniform_int(rng, -20, 20))};
      polys.push_back(oracle::random_star_polygon(rng, centre, oracle::uniform_int(rng, 3, 10)));
      regions.push_back(GeoRegion::make("r" + std::to_string(r), polys.back()));
    }
    const LatLon ref{static_cast<double>(oracle::uniform_int(rng, -10, 10)), static_cast<double>(oracle::uniform_int(rng, -10, 10))};
    std::vector<Observation> obs;
    for (int s = 0; s < species; ++s) {
      if (oracle::uniform_int(rng, 0, 9) == 0) continue;  // no geodata
      for (int o = oracle::uniform_int(rng, 1, 5); o > 0; --o) {
        LatLon p;
        if (oracle::uniform_int(rng, 0, 3) == 0) {
          const auto& poly = polys[static_cast<std::size_t>(oracle::uniform_int(rng, 0, static_cast<int>(polys.size()) - 1))];
          const auto a = poly[static_cast<std::size_t>(oracle::uniform_int(rng, 0, static_cast<int>(poly.size()) - 1))];
          p = a;  // a vertex lies on the boundary
        } else {
          p = {static_cast<double>(oracle::uniform_int(rng, -35, 35)), static_cast<double>(oracle::uniform_int(rng, -35, 35))};
        }
        obs.push_back({ids[static_cast<std::size_t>(s)], p});
      }
    }
    const auto mask = build_mask(nearest_by_species(obs, ref), regions, catalog);

    std::size_t expected_count = 0;
    for (int s = 0; s < species; ++s) {
      const Observation* best = nullptr;
      for (const auto& o : obs) {
        if (o.species_id != ids[static_cast<std::size_t>(s)]) continue;
        const double d = (o.where.lat - ref.lat) * (o.where.lat - ref.lat) + (o.where.lon - ref.lon) * (o.where.lon - ref.lon);
        const double bd = best ? (best->where.lat - ref.lat) * (best->where.lat - ref.lat) +
                                     (best->where.lon - ref.lon) * (best->where.lon - ref.lon)
                               : 0.0;
        if (!best || d < bd) best = &o;
      }
      bool inside = false;
      for (const auto& poly : polys) {
        if (!best) break;
        const bool hit = oracle::winding_inside(poly, best->where);
        for (std::size_t v = 0; hit && v < poly.size(); ++v) {
          if (oracle::on_segment(poly[v], poly[(v + 1) % poly.size()], best->where)) {
            ++boundary_hits;
            break;
          }
        }
        inside = inside || hit;
      }
      expected_count += inside ? 1 : 0;
      if (mask.is_allowed(static_cast<SpeciesIndex>(s)) != inside) ++mismatches;
    }
    if (mask.allowed_count != expected_count) ++mismatches;
  }
  return {mismatches == 0 && boundary_hits > 0,
          "100 worlds, mismatches " + std::to_string(mismatches) + ", boundary nearest points " + std::to_string(boundary_hits)};
}

Outcome ablation_ordering() {
  const auto dir = work_dir("ablation");
  SynthParams params;  // seed 42, 100 images, 4x4 tiles, 50 species, 3 clusters, noise 0.5
  write_bundle(synth(params), params, dir);
  const RunConfig cfg = load_run_config(dir / "config.json");
  const auto rows = run_ablation(cfg, dir / "tiles_whole.ndjson");
  auto score = [&](const std::string& method, std::size_t k, bool tiled) {
    for (const auto& r : rows) {
      if (r.method == method && r.top_k == k && (r.tiles != "-") == tiled) return r.score;
    }
    throw std::runtime_error("missing ablation row " + method);
  };
  const double baseline = score("Naive baseline", 10, false);
  const double untiled = score("ViT", 20, false);
  const double tiled = score("ViT", 9, true);
  const double priors = score("ViT + PRIORS", 9, true);
  std::cout << format_ablation(rows);
  const bool ok = baseline < untiled && untiled < tiled && priors >= tiled;
  return {ok, "baseline top-10 " + fmt(baseline) + " < no-tiling top-20 " + fmt(untiled) + " < tiling top-9 " +
                  fmt(tiled) + " <= tiling+priors top-9 " + fmt(priors)};
}

Outcome region_fixture() {
  const auto registry = load_region_registry(fs::path(QUADRAT_DATA_DIR) / "regions.txt");
  const std::vector<std::pair<std::string, ClusterId>> expected{
      {"CBN-PdlC", 2}, {"CBN-Pla", 3},   {"GUARDEN-CBNMed", 1}, {"RNNB", 1},     {"LISAH-BOU", 1},
      {"OPTMix", 1},   {"LISAH-BVD", 1}, {"GUARDEN-AMB", 1},    {"LISAH-PEC", 1}, {"CBN-can", 2},
      {"LISAH-JAS", 1}, {"CBN-Pyr", 1},  {"2024-CEV3", 1}};
  if (registry.names() != RegionRegistry::plantclef_default().names() || registry.size() != 13) {
    return {false, "shipped registry differs from the built-in thirteen regions"};
  }
  int parsed = 0;
  for (const auto& [name, cluster] : expected) {
    for (const auto* suffix : {"-A1-20230705", "-T03-Q01", "_x"}) {
      if (parse_region(name + suffix, registry) == name) ++parsed;
    }
  }
  const auto golden = read_region_clusters(fs::path(QUADRAT_DATA_DIR) / "region_clusters.csv");
  bool golden_ok = golden.size() == expected.size();
  for (const auto& [name, cluster] : expected) golden_ok = golden_ok && golden.count(name) && golden.at(name) == cluster;
  return {parsed == 39 && golden_ok,
          "parsed " + std::to_string(parsed) + "/39 synthesized ids, golden file " + (golden_ok ? "matches" : "differs")};
}

Outcome reproducibility() {
  const auto dir = work_dir("repro");
  const std::string cli = QUADRAT_CLI_PATH;
  auto sh = [&](const std::string& args) {
    const int status = std::system(("\"" + cli + "\" " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  if (sh("synth --out \"" + dir.string() + "\" --seed 42") != 0) return {false, "synth failed"};
  const std::string base = "run --config \"" + (dir / "config.json").string() + "\" --threads 1 --seed 42 --submission ";
  if (sh(base + "\"" + (dir / "first.csv").string() + "\"") != 0) return {false, "first run failed"};
  if (sh(base + "\"" + (dir / "second.csv").string() + "\"") != 0) return {false, "second run failed"};
  const auto a = csv::read_text(dir / "first.csv");
  const auto b = csv::read_text(dir / "second.csv");
  return {a == b && !a.empty(), std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"leaderboard non-reproducibility stated", 0, leaderboard_statement},
      {"metric oracle", 5, metric_oracle},
      {"aggregation oracle", 5, aggregation_oracle},
      {"tiler property suite", 2, tiler_suite},
      {"projector gradient check", 30, gradient_check},
      {"projection + k-means blob recovery", 60, blob_recovery},
      {"k-means inertia monotonicity and k=1 mean", 5, kmeans_suite},
      {"uniform prior identity", 2, prior_identity},
      {"geofilter oracle", 5, geofilter_oracle},
      {"end-to-end ablation ordering", 120, ablation_ordering},
      {"region fixture", 0, region_fixture},
      {"run reproducibility", 0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = out.pass;
    std::string detail = out.detail;
    if (c.time_limit_s > 0 && seconds >= c.time_limit_s) {
      pass = false;
      detail += "; exceeded " + fmt(c.time_limit_s) + " s";
    }
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3f s", seconds);
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << timing << ")  " << detail << std::endl;
    failed += pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
