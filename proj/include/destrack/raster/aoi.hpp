#pragma once

#include <vector>

#include "destrack/raster/geo_raster.hpp"

namespace destrack::raster {

enum class AoiKind { PopulatedArea, NoAnalysisZone };

/// Closed polygon in lon/lat. First vertex equals last.
using Ring = std::vector<LonLat>;

/// Even-odd (crossing number) test against a single closed ring.
bool ring_contains(const Ring& ring, LonLat p);

/// True if any two non-adjacent edges of the ring intersect.
bool ring_self_intersects(const Ring& ring);

class AreaOfInterest {
public:
    /// Throws ConfigError if a ring has fewer than 4 vertices, is not
    /// closed, or self-intersects.
    AreaOfInterest(AoiKind kind, std::vector<Ring> rings);

    AoiKind kind() const { return kind_; }
    const std::vector<Ring>& rings() const { return rings_; }

    /// Inside any ring.
    bool contains(LonLat p) const;

private:
    AoiKind kind_;
    std::vector<Ring> rings_;
};

}  // namespace destrack::raster
