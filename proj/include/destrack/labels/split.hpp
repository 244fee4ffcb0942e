#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>

#include "destrack/raster/patch_grid.hpp"

namespace destrack::labels {

enum class Split : std::uint8_t { Train, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Per-location train/test assignment; one answer for every date.
class SplitAssignment {
public:
    SplitAssignment() = default;
    SplitAssignment(std::map<raster::PatchId, Split> assignment, double train_fraction, std::uint64_t seed);

    /// Throws LookupError for an unknown patch.
    Split of(raster::PatchId id) const;
    bool contains(raster::PatchId id) const { return assignment_.contains(id); }
    const std::map<raster::PatchId, Split>& assignment() const { return assignment_; }
    std::size_t count(Split s) const;
    double train_fraction() const { return train_fraction_; }
    std::uint64_t seed() const { return seed_; }

    friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;

private:
    std::map<raster::PatchId, Split> assignment_;
    double train_fraction_ = 0.7;
    std::uint64_t seed_ = 0;
};

/// Seeded hash of the patch id; depends on nothing else.
std::uint64_t patch_hash(raster::PatchId id, std::uint64_t seed);

/// Patches ranked by patch_hash; the first round(fraction * n) go to
/// Train. The realised fraction is exact up to rounding, independent of
/// dates and labels. Throws ConfigError unless fraction is in (0, 1).
SplitAssignment split_patches(std::span<const raster::PatchId> patches, double train_fraction, std::uint64_t seed);

}  // namespace destrack::labels
