#include "quadrat/catalog.hpp"

#include <unordered_set>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"

namespace quadrat {

SpeciesCatalog SpeciesCatalog::from_ids(std::vector<SpeciesId> ids) {
  if (ids.empty()) throw InputError("species catalog is empty");
  SpeciesCatalog cat;
  cat.index_.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!cat.index_.emplace(ids[i], static_cast<SpeciesIndex>(i)).second) {
      throw DuplicateSpeciesError(ids[i]);
    }
  }
  cat.ids_ = std::move(ids);
  return cat;
}

std::optional<SpeciesIndex> SpeciesCatalog::find(SpeciesId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SpeciesIndex SpeciesCatalog::index_of(SpeciesId id) const {
  if (auto idx = find(id)) return *idx;
  throw InputError("species_id " + std::to_string(id) + " is not in the catalog");
}

SpeciesCatalog load_catalog(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t col = table.column("species_id");
  std::vector<SpeciesId> ids;
  ids.reserve(table.rows.size());
  for (const auto& row : table.rows) ids.push_back(csv::to_int(row.fields[col], table, row));
  if (ids.empty()) throw InputError(path.string() + ": species catalog is empty");
  return SpeciesCatalog::from_ids(std::move(ids));
}

RegionRegistry RegionRegistry::from_names(std::vector<std::string> names) {
  if (names.empty()) throw InputError("region registry is empty");
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw InputError("region registry contains an empty name");
    if (!seen.insert(n).second) throw InputError("duplicate region name '" + n + "'");
  }
  RegionRegistry reg;
  reg.names_ = std::move(names);
  return reg;
}

RegionRegistry RegionRegistry::plantclef_default() {
  return from_names({"CBN-PdlC", "CBN-Pla", "GUARDEN-CBNMed", "RNNB", "LISAH-BOU", "OPTMix",
                     "LISAH-BVD", "GUARDEN-AMB", "LISAH-PEC", "CBN-can", "LISAH-JAS", "CBN-Pyr",
                     "2024-CEV3"});
}

bool RegionRegistry::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

RegionRegistry load_region_registry(const std::filesystem::path& path) {
  const std::string text = csv::read_text(path);
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    names.push_back(line.substr(first));
  }
  return RegionRegistry::from_names(std::move(names));
}

const std::string& parse_region(std::string_view quadrat_id, const RegionRegistry& registry) {
  const std::string* best = nullptr;
  for (const auto& name : registry.names()) {
    if (quadrat_id.substr(0, name.size()) == name && (best == nullptr || name.size() > best->size())) {
      best = &name;
    }
  }
  if (best == nullptr) throw UnknownRegionError(std::string(quadrat_id));
  return *best;
}

std::string transect_of(std::string_view quadrat_id, const TransectRule& rule) {
  if (auto it = rule.explicit_map.find(std::string(quadrat_id)); it != rule.explicit_map.end()) {
    return it->second;
  }
  if (rule.delimiter.empty()) return std::string(quadrat_id);
  const auto cut = quadrat_id.rfind(rule.delimiter);
  if (cut == std::string_view::npos || cut == 0) return std::string(quadrat_id);
  return std::string(quadrat_id.substr(0, cut));
}

std::unordered_map<std::string, std::string> load_transect_map(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t q = table.column("quadrat_id");
  const std::size_t t = table.column("transect_id");
  std::unordered_map<std::string, std::string> map;
  for (const auto& row : table.rows) {
    if (row.fields[q].empty() || row.fields[t].empty()) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": empty id");
    }
    if (!map.emplace(row.fields[q], row.fields[t]).second) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": duplicate quadrat_id '" +
                       row.fields[q] + "'");
    }
  }
  return map;
}

QuadratRecord make_quadrat_record(std::string quadrat_id, int width_px, int height_px,
                                  const RegionRegistry& registry, const TransectRule& rule) {
  if (quadrat_id.empty()) throw InputError("empty quadrat_id");
  if (width_px <= 0 || height_px <= 0) {
    throw InputError("quadrat '" + quadrat_id + "' has non-positive dimensions");
  }
  QuadratRecord rec;
  rec.region = parse_region(quadrat_id, registry);
  rec.transect_id = transect_of(quadrat_id, rule);
  rec.width_px = width_px;
  rec.height_px = height_px;
  rec.quadrat_id = std::move(quadrat_id);
  return rec;
}

std::vector<QuadratRecord> load_quadrats(const std::filesystem::path& path,
                                         const RegionRegistry& registry, const TransectRule& rule) {
  const csv::Table table = csv::read_file(path);
  const std::size_t q = table.column("quadrat_id");
  const std::size_t w = table.column("width_px");
  const std::size_t h = table.column("height_px");
  std::vector<QuadratRecord> out;
  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    const auto width = csv::to_int(row.fields[w], table, row);
    const auto height = csv::to_int(row.fields[h], table, row);
    if (!seen.insert(row.fields[q]).second) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": duplicate quadrat_id");
    }
    try {
      out.push_back(make_quadrat_record(row.fields[q], static_cast<int>(width),
                                        static_cast<int>(height), registry, rule));
    } catch (const UnknownRegionError&) {
      throw;
    } catch (const InputError& e) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace quadrat
