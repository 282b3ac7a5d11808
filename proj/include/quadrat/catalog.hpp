#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quadrat {

using SpeciesId = std::int64_t;      // opaque external identifier
using SpeciesIndex = std::uint32_t;  // dense 0-based position in the label space

/// Bijection between external species ids and contiguous dense indices 0..S-1,
/// assigned in input order.
class SpeciesCatalog {
 public:
  /// Throws DuplicateSpeciesError on a repeated id, InputError when `ids` is empty.
  static SpeciesCatalog from_ids(std::vector<SpeciesId> ids);

  std::size_t size() const noexcept { return ids_.size(); }
  SpeciesId species_id(SpeciesIndex index) const { return ids_.at(index); }
  std::optional<SpeciesIndex> find(SpeciesId id) const;
  /// Like find(), but throws InputError for ids outside the catalog.
  SpeciesIndex index_of(SpeciesId id) const;
  const std::vector<SpeciesId>& ids() const noexcept { return ids_; }

 private:
  std::vector<SpeciesId> ids_;
  std::unordered_map<SpeciesId, SpeciesIndex> index_;
};

/// CSV with header `species_id`, one integer per row.
SpeciesCatalog load_catalog(const std::filesystem::path& path);

/// Region name prefixes used to recognise where a quadrat was photographed.
class RegionRegistry {
 public:
  /// Names must be non-empty and unique; overlapping prefixes are allowed.
  static RegionRegistry from_names(std::vector<std::string> names);
  /// The thirteen survey regions of the PlantCLEF 2025 test set.
  static RegionRegistry plantclef_default();

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  bool contains(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

/// One region name per line; blank lines and `#` comments are ignored.
RegionRegistry load_region_registry(const std::filesystem::path& path);

/// Longest registry entry that is a prefix of `quadrat_id`; throws UnknownRegionError.
const std::string& parse_region(std::string_view quadrat_id, const RegionRegistry& registry);

/// How quadrats are grouped into transects. An explicit mapping wins; otherwise the
/// final `delimiter`-separated token of the quadrat id is dropped.
struct TransectRule {
  std::string delimiter = "-";
  std::unordered_map<std::string, std::string> explicit_map;
};

std::string transect_of(std::string_view quadrat_id, const TransectRule& rule = {});

/// CSV `quadrat_id,transect_id`.
std::unordered_map<std::string, std::string> load_transect_map(const std::filesystem::path& path);

struct QuadratRecord {
  std::string quadrat_id;
  std::string region;
  std::string transect_id;
  int width_px = 0;
  int height_px = 0;
};

QuadratRecord make_quadrat_record(std::string quadrat_id, int width_px, int height_px,
                                  const RegionRegistry& registry, const TransectRule& rule = {});

/// CSV `quadrat_id,width_px,height_px`.
std::vector<QuadratRecord> load_quadrats(const std::filesystem::path& path,
                                         const RegionRegistry& registry,
                                         const TransectRule& rule = {});

}  // namespace quadrat
