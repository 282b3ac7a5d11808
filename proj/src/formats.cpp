#include "quadrat/formats.hpp"

#include <json.hpp>
#include <set>
#include <sstream>
#include <unordered_set>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"

namespace quadrat {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string at(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

// Calls fn(record, line_no) for every non-blank line.
template <typename Fn>
void for_each_ndjson(std::string_view text, const std::string& source, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError(at(source, line_no) + ": invalid JSON: " + e.what());
    }
    if (!record.is_object()) throw InputError(at(source, line_no) + ": expected a JSON object");
    try {
      fn(record, line_no);
    } catch (const json::exception& e) {
      throw InputError(at(source, line_no) + ": schema violation: " + e.what());
    }
  }
}

const json& field(const json& record, const char* name, const std::string& where) {
  auto it = record.find(name);
  if (it == record.end()) throw InputError(where + ": missing field '" + name + "'");
  return *it;
}

std::int64_t int_field(const json& record, const char* name, const std::string& where) {
  const json& v = field(record, name, where);
  if (!v.is_number_integer()) throw InputError(where + ": field '" + std::string(name) + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string lines_of(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace

// --- tile predictions -------------------------------------------------------------------

std::vector<TilePrediction> parse_tile_predictions(std::string_view text, const std::string& source,
                                                   std::size_t species_count) {
  std::vector<TilePrediction> tiles;
  for_each_ndjson(text, source, [&](const json& r, std::size_t line) {
    const std::string where = at(source, line);
    TilePrediction t;
    const json& id = field(r, "image_id", where);
    if (!id.is_string() || id.get<std::string>().empty()) {
      throw InputError(where + ": image_id must be a non-empty string");
    }
    t.image_id = id.get<std::string>();
    t.row = static_cast<int>(int_field(r, "row", where));
    t.col = static_cast<int>(int_field(r, "col", where));
    if (t.row < 0 || t.col < 0) throw InputError(where + ": negative grid coordinate");
    const json& probs = field(r, "probs", where);
    if (!probs.is_array()) throw InputError(where + ": probs must be an array");
    for (const auto& e : probs) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number()) {
        throw InputError(where + ": probs entries must be [index, prob]");
      }
      const auto idx = e[0].get<std::int64_t>();
      if (idx < 0) throw InputError(where + ": negative species index");
      t.probs.push_back({static_cast<SpeciesIndex>(idx), e[1].get<double>()});
    }
    if (auto it = r.find("dense"); it != r.end()) t.dense_complete = it->get<bool>();
    try {
      validate_tile(t, species_count);
    } catch (const InvariantError& e) {
      throw InputError(where + ": " + e.what());
    }
    sort_by_probability(t.probs);
    tiles.push_back(std::move(t));
  });
  return tiles;
}

std::vector<TilePrediction> read_tile_predictions(const fs::path& path, std::size_t species_count) {
  return parse_tile_predictions(csv::read_text(path), path.string(), species_count);
}

std::string format_tile_predictions(std::span<const TilePrediction> tiles) {
  std::string out;
  for (const auto& t : tiles) {
    ordered_json r;
    r["image_id"] = t.image_id;
    r["row"] = t.row;
    r["col"] = t.col;
    ordered_json probs = ordered_json::array();
    for (const auto& e : t.probs) probs.push_back(ordered_json::array({e.index, e.prob}));
    r["probs"] = std::move(probs);
    if (t.dense_complete) r["dense"] = true;
    out += r.dump();
    out += '\n';
  }
  return out;
}

// --- tile plan --------------------------------------------------------------------------

std::string format_tile_plan(std::span<const TileRect> tiles, std::string_view image_id) {
  std::string out;
  for (const auto& t : tiles) {
    ordered_json r;
    if (!image_id.empty()) r["image_id"] = image_id;
    r["row"] = t.row;
    r["col"] = t.col;
    r["x0"] = t.x0;
    r["y0"] = t.y0;
    r["x1"] = t.x1;
    r["y1"] = t.y1;
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<TileRect> parse_tile_plan(std::string_view text, const std::string& source) {
  std::vector<TileRect> tiles;
  for_each_ndjson(text, source, [&](const json& r, std::size_t line) {
    const std::string where = at(source, line);
    tiles.push_back(TileRect{static_cast<int>(int_field(r, "row", where)),
                             static_cast<int>(int_field(r, "col", where)),
                             static_cast<int>(int_field(r, "x0", where)),
                             static_cast<int>(int_field(r, "y0", where)),
                             static_cast<int>(int_field(r, "x1", where)),
                             static_cast<int>(int_field(r, "y1", where))});
  });
  return tiles;
}

// --- embeddings -------------------------------------------------------------------------

EmbeddingMatrix parse_embeddings(std::string_view text, const std::string& source) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  for_each_ndjson(text, source, [&](const json& r, std::size_t line) {
    const std::string where = at(source, line);
    const json& id = field(r, "image_id", where);
    if (!id.is_string()) throw InputError(where + ": image_id must be a string");
    const json& vec = field(r, "vector", where);
    if (!vec.is_array() || vec.empty()) throw InputError(where + ": vector must be a non-empty array");
    std::vector<double> row;
    row.reserve(vec.size());
    for (const auto& v : vec) {
      if (!v.is_number()) throw InputError(where + ": vector entries must be numbers");
      row.push_back(v.get<double>());
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError(where + ": vector length " + std::to_string(row.size()) + " differs from " +
                       std::to_string(rows.front().size()));
    }
    ids.push_back(id.get<std::string>());
    rows.push_back(std::move(row));
  });
  if (rows.empty()) throw InputError(source + ": no embeddings");
  EmbeddingMatrix x;
  x.image_ids = std::move(ids);
  x.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      x.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  x.validate();
  return x;
}

EmbeddingMatrix read_embeddings(const fs::path& path) {
  return parse_embeddings(csv::read_text(path), path.string());
}

std::string format_embeddings(const EmbeddingMatrix& x) {
  std::string out;
  for (Eigen::Index i = 0; i < x.data.rows(); ++i) {
    ordered_json r;
    r["image_id"] = x.image_ids[static_cast<std::size_t>(i)];
    ordered_json vec = ordered_json::array();
    for (Eigen::Index j = 0; j < x.data.cols(); ++j) vec.push_back(x.data(i, j));
    r["vector"] = std::move(vec);
    out += r.dump();
    out += '\n';
  }
  return out;
}

// --- projection / assignments / region map ----------------------------------------------

std::string format_projection(const Projection& p) {
  std::vector<std::string> lines{"image_id,x,y"};
  for (Eigen::Index i = 0; i < p.points.rows(); ++i) {
    lines.push_back(csv::escape(p.image_ids[static_cast<std::size_t>(i)]) + "," +
                    csv::format_double(p.points(i, 0)) + "," + csv::format_double(p.points(i, 1)));
  }
  return lines_of(lines);
}

Projection read_projection(const fs::path& path) {
  const csv::Table t = csv::read_file(path);
  const auto c_id = t.column("image_id");
  const auto c_x = t.column("x");
  const auto c_y = t.column("y");
  Projection p;
  p.points.resize(static_cast<Eigen::Index>(t.rows.size()), 2);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    p.image_ids.push_back(row.fields[c_id]);
    p.points(static_cast<Eigen::Index>(i), 0) = csv::to_double(row.fields[c_x], t, row);
    p.points(static_cast<Eigen::Index>(i), 1) = csv::to_double(row.fields[c_y], t, row);
  }
  if (t.rows.empty()) throw InputError(t.source + ": empty projection");
  if (!p.points.allFinite()) throw InputError(t.source + ": non-finite projection coordinates");
  return p;
}

std::string format_assignments(std::span<const std::string> image_ids,
                               std::span<const ClusterId> clusters) {
  if (image_ids.size() != clusters.size()) throw InvariantError("assignments not aligned with ids");
  std::vector<std::string> lines{"image_id,cluster"};
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    lines.push_back(csv::escape(image_ids[i]) + "," + std::to_string(clusters[i]));
  }
  return lines_of(lines);
}

Assignments read_assignments(const fs::path& path) {
  const csv::Table t = csv::read_file(path);
  const auto c_id = t.column("image_id");
  const auto c_cl = t.column("cluster");
  Assignments a;
  for (const auto& row : t.rows) {
    const auto c = csv::to_int(row.fields[c_cl], t, row);
    if (c < 0) throw InputError(at(t.source, row.line) + ": negative cluster id");
    a.image_ids.push_back(row.fields[c_id]);
    a.clusters.push_back(static_cast<ClusterId>(c));
  }
  return a;
}

std::string format_region_clusters(const RegionClusterMap& map) {
  std::vector<std::string> lines{"region,cluster"};
  for (const auto& [region, cluster] : map) {
    lines.push_back(csv::escape(region) + "," + std::to_string(cluster));
  }
  return lines_of(lines);
}

RegionClusterMap read_region_clusters(const fs::path& path) {
  const csv::Table t = csv::read_file(path);
  const auto c_r = t.column("region");
  const auto c_c = t.column("cluster");
  RegionClusterMap map;
  for (const auto& row : t.rows) {
    const auto c = csv::to_int(row.fields[c_c], t, row);
    if (c < 0) throw InputError(at(t.source, row.line) + ": negative cluster id");
    if (!map.emplace(row.fields[c_r], static_cast<ClusterId>(c)).second) {
      throw InputError(at(t.source, row.line) + ": duplicate region '" + row.fields[c_r] + "'");
    }
  }
  return map;
}

// --- priors -----------------------------------------------------------------------------

std::string format_priors(const ClusterPriors& priors) {
  std::string out;
  for (std::size_t c = 0; c < priors.priors.size(); ++c) {
    ordered_json r;
    r["cluster"] = c;
    r["prior"] = priors.priors[c];
    out += r.dump();
    out += '\n';
  }
  return out;
}

ClusterPriors read_priors(const fs::path& path, std::size_t species_count) {
  const std::string source = path.string();
  std::map<ClusterId, std::vector<double>> rows;
  for_each_ndjson(csv::read_text(path), source, [&](const json& r, std::size_t line) {
    const std::string where = at(source, line);
    const auto c = int_field(r, "cluster", where);
    if (c < 0) throw InputError(where + ": negative cluster id");
    auto prior = field(r, "prior", where).get<std::vector<double>>();
    if (prior.size() != species_count) {
      throw InputError(where + ": prior has " + std::to_string(prior.size()) + " entries, expected " +
                       std::to_string(species_count));
    }
    double sum = 0.0;
    for (double v : prior) {
      if (!(v >= 0.0)) throw InputError(where + ": negative prior entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InputError(where + ": prior does not sum to 1");
    if (!rows.emplace(static_cast<ClusterId>(c), std::move(prior)).second) {
      throw InputError(where + ": duplicate cluster " + std::to_string(c));
    }
  });
  ClusterPriors out;
  for (const auto& [c, prior] : rows) {
    if (c != out.priors.size()) throw InputError(source + ": cluster ids must be 0..k-1");
    out.priors.push_back(prior);
  }
  if (out.priors.empty()) throw InputError(source + ": no priors");
  return out;
}

// --- mask -------------------------------------------------------------------------------

std::string format_mask(const SpeciesMask& mask, const SpeciesCatalog& catalog) {
  if (mask.allowed.size() != catalog.size()) throw InvariantError("mask does not match catalog");
  std::vector<std::string> lines{"species_id,allowed"};
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    lines.push_back(std::to_string(catalog.species_id(static_cast<SpeciesIndex>(i))) + "," +
                    (mask.allowed[i] ? "1" : "0"));
  }
  return lines_of(lines);
}

SpeciesMask read_mask(const fs::path& path, const SpeciesCatalog& catalog) {
  const csv::Table t = csv::read_file(path);
  const auto c_id = t.column("species_id");
  const auto c_a = t.column("allowed");
  SpeciesMask mask{std::vector<bool>(catalog.size(), false), 0};
  std::vector<bool> seen(catalog.size(), false);
  for (const auto& row : t.rows) {
    const auto idx = catalog.find(csv::to_int(row.fields[c_id], t, row));
    if (!idx) throw InputError(at(t.source, row.line) + ": species not in catalog");
    const std::string& a = row.fields[c_a];
    if (a != "0" && a != "1") throw InputError(at(t.source, row.line) + ": allowed must be 0 or 1");
    if (seen[*idx]) throw InputError(at(t.source, row.line) + ": duplicate species");
    seen[*idx] = true;
    if (a == "1") {
      mask.allowed[*idx] = true;
      ++mask.allowed_count;
    }
  }
  return mask;
}

// --- observations / regions -------------------------------------------------------------

std::vector<Observation> read_observations(const fs::path& path) {
  const csv::Table t = csv::read_file(path);
  const auto c_id = t.column("species_id");
  const auto c_lat = t.column("lat");
  const auto c_lon = t.column("lon");
  std::vector<Observation> obs;
  obs.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    Observation o{csv::to_int(row.fields[c_id], t, row),
                  {csv::to_double(row.fields[c_lat], t, row), csv::to_double(row.fields[c_lon], t, row)}};
    try {
      validate_coordinates(o.where);
    } catch (const InputError& e) {
      throw InputError(at(t.source, row.line) + ": " + e.what());
    }
    obs.push_back(o);
  }
  return obs;
}

std::string format_observations(std::span<const Observation> obs) {
  std::vector<std::string> lines{"species_id,lat,lon"};
  for (const auto& o : obs) {
    lines.push_back(std::to_string(o.species_id) + "," + csv::format_double(o.where.lat) + "," +
                    csv::format_double(o.where.lon));
  }
  return lines_of(lines);
}

std::vector<GeoRegion> parse_geo_regions(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(source + ": invalid JSON: " + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw InputError(source + ": expected a non-empty array of regions");
  std::vector<GeoRegion> regions;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = source + ": region #" + std::to_string(i);
    const json& r = doc[i];
    if (!r.is_object()) throw InputError(where + ": expected an object");
    const json& name = field(r, "name", where);
    const json& poly = field(r, "polygon", where);
    if (!name.is_string() || !poly.is_array()) throw InputError(where + ": bad name or polygon");
    std::vector<LatLon> vertices;
    for (const auto& v : poly) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw InputError(where + ": vertices must be [lat, lon]");
      }
      vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    try {
      regions.push_back(GeoRegion::make(name.get<std::string>(), std::move(vertices)));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return regions;
}

std::vector<GeoRegion> read_geo_regions(const fs::path& path) {
  return parse_geo_regions(csv::read_text(path), path.string());
}

std::string format_geo_regions(std::span<const GeoRegion> regions) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : regions) {
    ordered_json poly = ordered_json::array();
    for (const auto& v : r.vertices()) poly.push_back(ordered_json::array({v.lat, v.lon}));
    ordered_json obj;
    obj["name"] = r.name();
    obj["polygon"] = std::move(poly);
    doc.push_back(std::move(obj));
  }
  return doc.dump(2) + "\n";
}

// --- training counts --------------------------------------------------------------------

std::vector<std::uint64_t> read_training_counts(const fs::path& path, const SpeciesCatalog& catalog) {
  const csv::Table t = csv::read_file(path);
  const auto c_id = t.column("species_id");
  const auto c_n = t.column("count");
  std::vector<std::uint64_t> counts(catalog.size(), 0);
  std::vector<bool> seen(catalog.size(), false);
  for (const auto& row : t.rows) {
    const auto idx = catalog.find(csv::to_int(row.fields[c_id], t, row));
    if (!idx) throw InputError(at(t.source, row.line) + ": species not in catalog");
    const auto n = csv::to_int(row.fields[c_n], t, row);
    if (n < 0) throw InputError(at(t.source, row.line) + ": negative count");
    if (seen[*idx]) throw InputError(at(t.source, row.line) + ": duplicate species");
    seen[*idx] = true;
    counts[*idx] = static_cast<std::uint64_t>(n);
  }
  return counts;
}

// --- ground truth -----------------------------------------------------------------------

GroundTruth read_ground_truth(const fs::path& path, const TransectRule& rule) {
  const csv::Table t = csv::read_file(path);
  const auto c_q = t.column("quadrat_id");
  const auto c_t = t.column("transect_id");
  const auto c_s = t.column("species_ids");
  std::vector<GroundTruthEntry> entries;
  for (const auto& row : t.rows) {
    GroundTruthEntry e{row.fields[c_q], row.fields[c_t], {}};
    if (rule.explicit_map.count(e.quadrat_id) || e.transect_id.empty()) {
      e.transect_id = transect_of(e.quadrat_id, rule);
    }
    std::istringstream ss(row.fields[c_s]);
    std::string tok;
    while (ss >> tok) {
      csv::Row tmp{row.line, {}};
      e.species.push_back(csv::to_int(tok, t, tmp));
    }
    entries.push_back(std::move(e));
  }
  try {
    return GroundTruth::from_entries(std::move(entries));
  } catch (const InputError& e) {
    throw InputError(t.source + ": " + e.what());
  }
}

std::string format_ground_truth(const GroundTruth& truth) {
  std::vector<std::string> lines{"quadrat_id,transect_id,species_ids"};
  for (const auto& e : truth.entries()) {
    std::string ids;
    for (std::size_t i = 0; i < e.species.size(); ++i) {
      if (i) ids += ' ';
      ids += std::to_string(e.species[i]);
    }
    lines.push_back(csv::escape(e.quadrat_id) + "," + csv::escape(e.transect_id) + ",\"" + ids + "\"");
  }
  return lines_of(lines);
}

// --- submission -------------------------------------------------------------------------

std::string format_submission(std::span<const SubmissionRow> rows) {
  if (rows.empty()) throw InputError("submission has no rows");
  std::unordered_set<std::string> seen;
  std::string out = "quadrat_id;species_ids\n";
  for (const auto& r : rows) {
    if (r.quadrat_id.empty()) throw InputError("submission row with empty quadrat_id");
    if (r.quadrat_id.find_first_of(";\n\r") != std::string::npos) {
      throw InputError("quadrat_id '" + r.quadrat_id + "' contains a reserved character");
    }
    if (!seen.insert(r.quadrat_id).second) {
      throw InputError("duplicate quadrat_id '" + r.quadrat_id + "' in submission");
    }
    if (r.species_ids.empty()) {
      throw InputError("quadrat '" + r.quadrat_id + "' has an empty species list");
    }
    std::set<SpeciesId> unique(r.species_ids.begin(), r.species_ids.end());
    if (unique.size() != r.species_ids.size()) {
      throw InputError("quadrat '" + r.quadrat_id + "' repeats a species");
    }
    out += r.quadrat_id;
    out += ";[";
    for (std::size_t i = 0; i < r.species_ids.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(r.species_ids[i]);
    }
    out += "]\n";
  }
  return out;
}

void write_submission(std::span<const SubmissionRow> rows, const fs::path& out) {
  csv::write_text(out, format_submission(rows));
}

std::vector<SubmissionRow> parse_submission(std::string_view text, const std::string& source) {
  const csv::Table t = csv::parse(text, source, ';');
  const auto c_q = t.column("quadrat_id");
  const auto c_s = t.column("species_ids");
  std::vector<SubmissionRow> rows;
  for (const auto& row : t.rows) {
    std::string list = row.fields[c_s];
    if (list.size() < 2 || list.front() != '[' || list.back() != ']') {
      throw InputError(at(source, row.line) + ": species_ids must be a bracketed list");
    }
    list = list.substr(1, list.size() - 2);
    SubmissionRow r{row.fields[c_q], {}};
    std::size_t pos = 0;
    while (pos < list.size()) {
      std::size_t end = list.find(',', pos);
      if (end == std::string::npos) end = list.size();
      std::string tok = list.substr(pos, end - pos);
      const auto first = tok.find_first_not_of(' ');
      const auto last = tok.find_last_not_of(' ');
      if (first == std::string::npos) throw InputError(at(source, row.line) + ": empty species id");
      r.species_ids.push_back(csv::to_int(tok.substr(first, last - first + 1), t, row));
      pos = end + 1;
    }
    rows.push_back(std::move(r));
  }
  format_submission(rows);  // same invariants as the writer
  return rows;
}

std::vector<SubmissionRow> read_submission(const fs::path& path) {
  return parse_submission(csv::read_text(path), path.string());
}

// --- score report -----------------------------------------------------------------------

std::string format_report(const ScoreReport& report) {
  ordered_json doc;
  doc["final_score"] = report.final_score;
  doc["n_transects"] = report.transects.size();
  doc["n_images"] = report.images.size();
  ordered_json transects = ordered_json::array();
  for (const auto& t : report.transects) {
    ordered_json o;
    o["transect_id"] = t.transect_id;
    o["mean_f1"] = t.mean_f1;
    o["n_images"] = t.image_count;
    transects.push_back(std::move(o));
  }
  doc["transects"] = std::move(transects);
  ordered_json images = ordered_json::array();
  for (const auto& i : report.images) {
    ordered_json o;
    o["quadrat_id"] = i.quadrat_id;
    o["transect_id"] = i.transect_id;
    o["f1"] = i.f1;
    o["missing"] = i.missing;
    images.push_back(std::move(o));
  }
  doc["images"] = std::move(images);
  doc["missing_predictions"] = report.missing_predictions;
  doc["unknown_predictions"] = report.unknown_predictions;
  return doc.dump(2) + "\n";
}

}  // namespace quadrat
