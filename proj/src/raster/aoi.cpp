#include "destrack/raster/aoi.hpp"

#include <algorithm>

#include "destrack/common/error.hpp"

namespace destrack::raster {

bool ring_contains(const Ring& ring, LonLat p) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const LonLat& a = ring[i];
        const LonLat& b = ring[j];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if (p.lon < x) inside = !inside;
        }
    }
    return inside;
}

namespace {

double orient(LonLat a, LonLat b, LonLat c) {
    return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
}

bool on_segment(LonLat a, LonLat b, LonLat p) {
    return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) &&
           std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat);
}

bool segments_intersect(LonLat p1, LonLat p2, LonLat q1, LonLat q2) {
    const double d1 = orient(q1, q2, p1);
    const double d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1);
    const double d4 = orient(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}

}  // namespace

bool ring_self_intersects(const Ring& ring) {
    const std::size_t edges = ring.size() - 1;
    for (std::size_t i = 0; i < edges; ++i) {
        for (std::size_t j = i + 1; j < edges; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == edges - 1);
            if (adjacent) continue;
            if (segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1])) return true;
        }
    }
    return false;
}

AreaOfInterest::AreaOfInterest(AoiKind kind, std::vector<Ring> rings) : kind_(kind), rings_(std::move(rings)) {
    if (rings_.empty()) throw ConfigError("area of interest has no rings");
    for (const auto& r : rings_) {
        if (r.size() < 4) throw ConfigError("ring needs at least 4 vertices");
        if (r.front().lon != r.back().lon || r.front().lat != r.back().lat)
            throw ConfigError("ring is not closed (first vertex != last vertex)");
        if (ring_self_intersects(r)) throw ConfigError("ring is self-intersecting");
    }
}

bool AreaOfInterest::contains(LonLat p) const {
    return std::any_of(rings_.begin(), rings_.end(), [&](const Ring& r) { return ring_contains(r, p); });
}

}  // namespace destrack::raster
