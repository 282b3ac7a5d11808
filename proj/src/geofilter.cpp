#include "quadrat/geofilter.hpp"

#include <algorithm>
#include <cmath>

#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

// x = lon, y = lat throughout the planar predicates.
double cross(LatLon a, LatLon b, LatLon p) {
  return (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
}

bool within_box(LatLon a, LatLon b, LatLon p) {
  return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) &&
         std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat);
}

bool on_segment(LatLon a, LatLon b, LatLon p) { return cross(a, b, p) == 0.0 && within_box(a, b, p); }

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool segments_intersect(LatLon a, LatLon b, LatLon c, LatLon d) {
  const int d1 = sign(cross(c, d, a));
  const int d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c));
  const int d4 = sign(cross(a, b, d));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && within_box(c, d, a)) || (d2 == 0 && within_box(c, d, b)) ||
         (d3 == 0 && within_box(a, b, c)) || (d4 == 0 && within_box(a, b, d));
}

}  // namespace

void validate_coordinates(LatLon p) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 ||
      p.lon < -180.0 || p.lon > 180.0) {
    throw InputError("coordinate out of range: (" + std::to_string(p.lat) + ", " +
                     std::to_string(p.lon) + ")");
  }
}

GeoRegion GeoRegion::make(std::string name, std::vector<LatLon> vertices) {
  if (vertices.size() >= 2 && vertices.front() == vertices.back()) vertices.pop_back();
  const std::size_t n = vertices.size();
  if (n < 3) throw InputError("region '" + name + "' needs at least 3 vertices");
  for (const auto& v : vertices) validate_coordinates(v);
  for (std::size_t i = 0; i < n; ++i) {
    const LatLon a = vertices[i];
    const LatLon b = vertices[(i + 1) % n];
    if (a == b) throw InputError("region '" + name + "' has a repeated vertex");
    for (std::size_t j = i + 1; j < n; ++j) {
      const LatLon c = vertices[j];
      const LatLon d = vertices[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Consecutive edges may only share their common vertex: reject fold-backs.
        const LatLon shared = (j == i + 1) ? b : a;
        const LatLon p = (j == i + 1) ? a : b;
        const LatLon q = (j == i + 1) ? d : c;
        if (cross(shared, p, q) == 0.0 &&
            ((p.lon - shared.lon) * (q.lon - shared.lon) + (p.lat - shared.lat) * (q.lat - shared.lat)) > 0.0) {
          throw InputError("region '" + name + "' folds back on itself");
        }
        continue;
      }
      if (segments_intersect(a, b, c, d)) {
        throw InputError("region '" + name + "' is self-intersecting (edges " + std::to_string(i) +
                         " and " + std::to_string(j) + ")");
      }
    }
  }
  GeoRegion region;
  region.name_ = std::move(name);
  region.vertices_ = std::move(vertices);
  return region;
}

SpeciesMask SpeciesMask::all(std::size_t species_count) {
  return SpeciesMask{std::vector<bool>(species_count, true), species_count};
}

double sq_dist(LatLon a, LatLon b) noexcept {
  const double dlat = a.lat - b.lat;
  const double dlon = a.lon - b.lon;
  return dlat * dlat + dlon * dlon;
}

std::optional<Observation> nearest_observation(std::span<const Observation> obs, LatLon ref) {
  if (obs.empty()) return std::nullopt;
  std::size_t best = 0;
  double best_d = sq_dist(obs[0].where, ref);
  for (std::size_t i = 1; i < obs.size(); ++i) {
    const double d = sq_dist(obs[i].where, ref);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return obs[best];
}

std::unordered_map<SpeciesId, Observation> nearest_by_species(std::span<const Observation> obs,
                                                              LatLon ref) {
  std::unordered_map<SpeciesId, Observation> nearest;
  for (const auto& o : obs) {
    auto [it, inserted] = nearest.emplace(o.species_id, o);
    if (!inserted && sq_dist(o.where, ref) < sq_dist(it->second.where, ref)) it->second = o;
  }
  return nearest;
}

bool contains(const GeoRegion& region, LatLon p) {
  const auto& v = region.vertices();
  const std::size_t n = v.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const LatLon a = v[j];
    const LatLon b = v[i];
    if (on_segment(a, b, p)) return true;
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

SpeciesMask build_mask(const std::unordered_map<SpeciesId, Observation>& nearest,
                       std::span<const GeoRegion> regions, const SpeciesCatalog& catalog) {
  if (regions.empty()) throw InputError("build_mask: no regions");
  SpeciesMask mask{std::vector<bool>(catalog.size(), false), 0};
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    auto it = nearest.find(catalog.species_id(static_cast<SpeciesIndex>(i)));
    if (it == nearest.end()) continue;
    const bool inside = std::any_of(regions.begin(), regions.end(), [&](const GeoRegion& r) {
      return contains(r, it->second.where);
    });
    if (inside) {
      mask.allowed[i] = true;
      ++mask.allowed_count;
    }
  }
  return mask;
}

SparseProbs apply_mask(const SparseProbs& probs, const SpeciesMask& mask, bool renormalize) {
  SparseProbs out;
  out.reserve(probs.size());
  double mass = 0.0;
  for (const auto& e : probs) {
    if (mask.is_allowed(e.index)) {
      out.push_back(e);
      mass += e.prob;
    }
  }
  if (renormalize && mass > 0.0) {
    for (auto& e : out) e.prob /= mass;
  }
  return out;
}

}  // namespace quadrat
