#include "quadrat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"
#include "quadrat/formats.hpp"

namespace quadrat {

namespace {

constexpr double kConfuserRate = 0.25;
constexpr double kPoolBoost = 1.5;
constexpr double kTruthBoost = 1.0;
constexpr double kFrequentBoost = 1.0;
constexpr std::size_t kFrequentCount = 10;

const LatLon kStudyCorner{40.0, -2.0};
const LatLon kStudyFar{48.0, 10.0};

std::string two_digits(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02zu", v);
  return buf;
}

SparseProbs mixture(SpeciesIndex peak, double peak_weight, const std::vector<double>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> soft(logits.size());
  double z = 0.0;
  for (std::size_t s = 0; s < logits.size(); ++s) z += soft[s] = std::exp(logits[s] - top);
  SparseProbs probs;
  probs.reserve(logits.size());
  for (std::size_t s = 0; s < logits.size(); ++s) {
    double p = (1.0 - peak_weight) * soft[s] / z;
    if (s == peak) p += peak_weight;
    if (p > 0.0) probs.push_back({static_cast<SpeciesIndex>(s), p});
  }
  double total = 0.0;
  for (const auto& e : probs) total += e.prob;
  for (auto& e : probs) e.prob /= total;
  sort_by_probability(probs);
  return probs;
}

}  // namespace

void SynthParams::validate() const {
  if (images < 2) throw InputError("synth: need at least 2 images");
  if (clusters < 1) throw InputError("synth: need at least 1 cluster");
  if (species < 2 * clusters) throw InputError("synth: need at least 2 species per cluster");
  if (min_species < 1 || min_species > max_species) {
    throw InputError("synth: species per image must satisfy 1 <= min <= max");
  }
  if (grid.rows < 1 || grid.cols < 1) throw InputError("synth: grid must be at least 1x1");
  if (static_cast<std::size_t>(grid.tile_count()) < min_species) {
    throw InputError("synth: grid has fewer tiles than species per image");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw InputError("synth: noise must lie in [0, 1]");
  if (embedding_dim < 1) throw InputError("synth: embedding_dim must be >= 1");
  if (!(separation >= 0.0)) throw InputError("synth: separation must be >= 0");
  if (quadrats_per_transect < 1) throw InputError("synth: quadrats_per_transect must be >= 1");
  if (width_px < grid.cols || height_px < grid.rows) throw InputError("synth: image smaller than grid");
}

SynthBundle synth(const SynthParams& p) {
  p.validate();
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  SynthBundle b;
  std::vector<SpeciesId> ids(p.species);
  std::iota(ids.begin(), ids.end(), SpeciesId{1000});
  b.catalog = SpeciesCatalog::from_ids(ids);
  b.registry = RegionRegistry::plantclef_default();
  const std::size_t region_count = b.registry.size();

  // The last fifth of the label space lives outside the study area.
  const std::size_t foreign_count = std::min(p.species - p.clusters, (p.species + 2) / 5);
  const std::size_t regional_count = p.species - foreign_count;
  std::vector<bool> foreign(p.species, false);
  for (std::size_t s = regional_count; s < p.species; ++s) foreign[s] = true;
  std::vector<std::vector<SpeciesIndex>> pools(p.clusters);
  for (std::size_t s = 0; s < regional_count; ++s) pools[s % p.clusters].push_back(static_cast<SpeciesIndex>(s));

  // Training frequency: Zipf over a random order that favours foreign species.
  std::vector<double> order_key(p.species);
  for (std::size_t s = 0; s < p.species; ++s) order_key[s] = unit(rng) - (foreign[s] ? 0.6 : 0.0);
  std::vector<std::size_t> by_rank(p.species);
  std::iota(by_rank.begin(), by_rank.end(), 0);
  std::stable_sort(by_rank.begin(), by_rank.end(),
                   [&](std::size_t a, std::size_t b2) { return order_key[a] < order_key[b2]; });
  b.training_counts.assign(p.species, 0);
  for (std::size_t r = 0; r < p.species; ++r) {
    b.training_counts[by_rank[r]] = static_cast<std::uint64_t>(std::llround(10000.0 / static_cast<double>(r + 1)));
  }
  std::vector<bool> frequent(p.species, false);
  for (auto idx : naive_baseline(b.training_counts, std::min(kFrequentCount, p.species))) frequent[idx] = true;
  std::vector<SpeciesIndex> frequent_list;
  for (std::size_t s = 0; s < p.species; ++s) {
    if (frequent[s]) frequent_list.push_back(static_cast<SpeciesIndex>(s));
  }

  // Geography: a square study area around the reference point.
  b.geo_regions.push_back(GeoRegion::make(
      "study", {kStudyCorner, {kStudyCorner.lat, kStudyFar.lon}, kStudyFar, {kStudyFar.lat, kStudyCorner.lon}}));
  const std::size_t no_geodata = foreign_count > 0 ? p.species - 1 : p.species;
  for (std::size_t s = 0; s < p.species; ++s) {
    if (s == no_geodata) continue;
    const SpeciesId id = ids[s];
    if (!foreign[s]) {
      b.observations.push_back({id, {42.0 + 4.0 * unit(rng), 1.0 + 6.0 * unit(rng)}});
    }
    const std::size_t far = 1 + pick(3);
    for (std::size_t f = 0; f < far; ++f) {
      b.observations.push_back({id, {55.0 + 10.0 * unit(rng), 20.0 + 40.0 * unit(rng)}});
    }
  }

  const std::size_t tiles_per_image = static_cast<std::size_t>(p.grid.tile_count());
  const auto rects = make_grid(p.width_px, p.height_px, p.grid);
  const double centre_scale = p.separation / std::sqrt(2.0);
  b.embeddings.data.resize(static_cast<Eigen::Index>(p.images), static_cast<Eigen::Index>(p.embedding_dim));
  std::vector<GroundTruthEntry> truth_entries;
  std::vector<std::size_t> per_region(region_count, 0);

  for (std::size_t i = 0; i < p.images; ++i) {
    const std::size_t region = i % region_count;
    const std::size_t cluster = region % p.clusters;
    const std::size_t slot = per_region[region]++;
    const std::string transect =
        b.registry.names()[region] + "-T" + two_digits(slot / p.quadrats_per_transect);
    const std::string qid = transect + "-Q" + two_digits(slot % p.quadrats_per_transect);

    b.embeddings.image_ids.push_back(qid);
    for (std::size_t d = 0; d < p.embedding_dim; ++d) {
      const double centre = (d == cluster % p.embedding_dim) ? centre_scale : 0.0;
      b.embeddings.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = centre + gauss(rng);
    }
    b.generator_clusters.push_back(static_cast<ClusterId>(cluster));
    b.quadrats.push_back({qid, b.registry.names()[region], transect, p.width_px, p.height_px});

    // Truth: m pool species, each dominating at least two tiles when the grid allows.
    const auto& pool = pools[cluster];
    const std::size_t per_species = tiles_per_image >= 2 * p.min_species ? 2 : 1;
    const std::size_t max_m = std::min({p.max_species, pool.size(), tiles_per_image / per_species});
    const std::size_t min_m = std::min(p.min_species, max_m);
    const std::size_t m = min_m + pick(max_m - min_m + 1);
    std::vector<SpeciesIndex> shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::vector<SpeciesIndex> truth(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(truth.begin(), truth.end());

    std::vector<SpeciesIndex> dominant;
    for (auto s : truth) dominant.insert(dominant.end(), per_species, s);
    while (dominant.size() < tiles_per_image) dominant.push_back(truth[pick(m)]);
    std::shuffle(dominant.begin(), dominant.end(), rng);

    std::vector<bool> in_truth(p.species, false), in_pool(p.species, false);
    for (auto s : truth) in_truth[s] = true;
    for (auto s : pool) in_pool[s] = true;

    for (std::size_t t = 0; t < tiles_per_image; ++t) {
      TilePrediction tile{qid, rects[t].row, rects[t].col, {}, true};
      SpeciesIndex peak = dominant[t];
      if (p.noise == 0.0) {
        tile.probs = {{peak, 1.0}};
      } else {
        if (unit(rng) < kConfuserRate * p.noise) {
          SpeciesIndex confuser = peak;
          while (in_truth[confuser]) confuser = static_cast<SpeciesIndex>(pick(p.species));
          peak = confuser;
        }
        std::vector<double> logits(p.species);
        for (std::size_t s = 0; s < p.species; ++s) {
          logits[s] = gauss(rng) + (in_pool[s] ? kPoolBoost : 0.0) + (in_truth[s] ? kTruthBoost : 0.0) +
                      (frequent[s] ? kFrequentBoost : 0.0);
        }
        tile.probs = mixture(peak, 1.0 - p.noise, logits);
      }
      b.tiles.push_back(std::move(tile));
    }

    // Whole-image view: a single label, often a common training species.
    std::vector<std::size_t> tile_votes(p.species, 0);
    for (auto s : dominant) ++tile_votes[s];
    SpeciesIndex whole_peak = truth.front();
    for (auto s : truth) {
      if (tile_votes[s] > tile_votes[whole_peak]) whole_peak = s;
    }
    if (unit(rng) >= 0.5) whole_peak = frequent_list[pick(frequent_list.size())];
    std::vector<double> logits(p.species);
    for (std::size_t s = 0; s < p.species; ++s) {
      logits[s] = gauss(rng) + (in_truth[s] ? 1.0 : 0.0) + (frequent[s] ? 1.5 : 0.0);
    }
    b.whole_image_tiles.push_back({qid, 0, 0, mixture(whole_peak, 0.5, logits), true});

    LabelSet labels;
    for (auto s : truth) labels.push_back(ids[s]);
    truth_entries.push_back({qid, transect, std::move(labels)});
  }
  b.truth = GroundTruth::from_entries(std::move(truth_entries));
  b.embeddings.validate();
  return b;
}

void write_bundle(const SynthBundle& b, const SynthParams& p, const std::filesystem::path& dir) {
  std::string catalog = "species_id\n";
  for (auto id : b.catalog.ids()) catalog += std::to_string(id) + "\n";
  csv::write_text(dir / "catalog.csv", catalog);

  std::string regions;
  for (const auto& name : b.registry.names()) regions += name + "\n";
  csv::write_text(dir / "regions.txt", regions);

  csv::write_text(dir / "geo_regions.json", format_geo_regions(b.geo_regions));
  csv::write_text(dir / "observations.csv", format_observations(b.observations));

  std::string counts = "species_id,count\n";
  for (std::size_t s = 0; s < b.training_counts.size(); ++s) {
    counts += std::to_string(b.catalog.species_id(static_cast<SpeciesIndex>(s))) + "," +
              std::to_string(b.training_counts[s]) + "\n";
  }
  csv::write_text(dir / "training_counts.csv", counts);

  csv::write_text(dir / "embeddings.ndjson", format_embeddings(b.embeddings));
  csv::write_text(dir / "tiles.ndjson", format_tile_predictions(b.tiles));
  csv::write_text(dir / "tiles_whole.ndjson", format_tile_predictions(b.whole_image_tiles));
  csv::write_text(dir / "truth.csv", format_ground_truth(b.truth));

  std::string quadrats = "quadrat_id,width_px,height_px\n";
  for (const auto& q : b.quadrats) {
    quadrats += csv::escape(q.quadrat_id) + "," + std::to_string(q.width_px) + "," + std::to_string(q.height_px) + "\n";
  }
  csv::write_text(dir / "quadrats.csv", quadrats);
  csv::write_text(dir / "clusters.csv", format_assignments(b.embeddings.image_ids, b.generator_clusters));

  nlohmann::ordered_json cfg;
  cfg["mode"] = "tiling";
  cfg["grid"] = std::to_string(p.grid.rows) + "x" + std::to_string(p.grid.cols);
  cfg["catalog"] = "catalog.csv";
  cfg["tiles"] = "tiles.ndjson";
  cfg["training_counts"] = "training_counts.csv";
  cfg["truth"] = "truth.csv";
  cfg["quadrats"] = "quadrats.csv";
  cfg["seed"] = p.seed;
  cfg["geo"] = {{"enabled", false}, {"regions", "geo_regions.json"}, {"observations", "observations.csv"}};
  cfg["priors"] = {{"enabled", true}, {"k", p.clusters}, {"embeddings", "embeddings.ndjson"}, {"registry", "regions.txt"}};
  cfg["output"] = {{"submission", "submission.csv"}, {"report", "report.json"}, {"intermediates", "intermediates"}};
  csv::write_text(dir / "config.json", cfg.dump(2) + "\n");
}

}  // namespace quadrat
