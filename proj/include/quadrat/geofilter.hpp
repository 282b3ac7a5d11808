#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "quadrat/aggregator.hpp"
#include "quadrat/catalog.hpp"

namespace quadrat {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Reference point in southern France used to rank observations.
inline constexpr LatLon kDefaultReference{44.0, 4.0};

struct Observation {
  SpeciesId species_id = 0;
  LatLon where;
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Throws InputError when latitude or longitude is out of range or not finite.
void validate_coordinates(LatLon p);

/// Simple polygon in (lat, lon), implicitly closed.
class GeoRegion {
 public:
  /// Requires >= 3 vertices and no self-intersections; throws InputError.
  static GeoRegion make(std::string name, std::vector<LatLon> vertices);

  const std::string& name() const noexcept { return name_; }
  const std::vector<LatLon>& vertices() const noexcept { return vertices_; }

 private:
  std::string name_;
  std::vector<LatLon> vertices_;
};

struct SpeciesMask {
  std::vector<bool> allowed;  // indexed by dense species index
  std::size_t allowed_count = 0;

  bool is_allowed(SpeciesIndex i) const { return allowed.at(i); }
  static SpeciesMask all(std::size_t species_count);
};

/// Planar squared distance in degree space.
double sq_dist(LatLon a, LatLon b) noexcept;

/// Observation closest to `ref`; the first one wins ties. nullopt when `obs` is empty
/// (the species has no geodata).
std::optional<Observation> nearest_observation(std::span<const Observation> obs, LatLon ref);

/// Groups observations by species and keeps each species' nearest one.
std::unordered_map<SpeciesId, Observation> nearest_by_species(std::span<const Observation> obs,
                                                              LatLon ref);

/// Ray-casting containment; points on an edge or vertex are inside.
bool contains(const GeoRegion& region, LatLon p);

/// A species is allowed iff its nearest observation lies in any region. Species without
/// an entry in `nearest` are disallowed; entries for ids outside the catalog are ignored.
SpeciesMask build_mask(const std::unordered_map<SpeciesId, Observation>& nearest,
                       std::span<const GeoRegion> regions, const SpeciesCatalog& catalog);

/// Drops disallowed entries, optionally renormalising the survivors to unit mass.
/// Returns an empty vector when nothing survives.
SparseProbs apply_mask(const SparseProbs& probs, const SpeciesMask& mask, bool renormalize);

}  // namespace quadrat
