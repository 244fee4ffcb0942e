#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "destrack/raster/patch_grid.hpp"
#include "destrack/smoother/score_panel.hpp"

namespace destrack::smoother {

inline constexpr int kFeaturesPerOffset = 5;  // own, ring-1 mean/std, ring-2 mean/std
inline constexpr int kLagFeatureCount = 15;

struct FeatureOptions {
    /// Adds offsets +1 and +2 after the lags (25 features). Uses future
    /// dates, so it is off unless asked for.
    bool include_leads = false;

    int feature_count() const { return include_leads ? 25 : kLagFeatureCount; }
    friend bool operator==(const FeatureOptions&, const FeatureOptions&) = default;
};

/// For each offset in {0, -1, -2} (then +1, +2 with leads): own score,
/// ring-1 mean and population std, ring-2 mean and population std.
/// Rings are Chebyshev distance 1 and 2 among included patches. A missing
/// date copies the offset-0 block and sets its mask bit (bit 0 for -1,
/// bit 1 for -2, bit 2 for +1, bit 3 for +2). A ring with no included
/// neighbors reports the own score and std 0.
struct LagFeatureVector {
    std::vector<double> values;
    std::uint8_t mask = 0;
};

/// Included neighbors of one patch, as grid indices.
struct Neighborhood {
    std::vector<std::size_t> ring1;
    std::vector<std::size_t> ring2;
};

std::vector<Neighborhood> neighborhoods(const raster::PatchGrid& grid);

/// Throws LookupError if the patch is not in the grid or the date is not
/// in the panel.
LagFeatureVector build_features(const ScorePanel& panel, const raster::PatchGrid& grid, raster::PatchId id, Date date,
                                const FeatureOptions& options = {});

/// Row-major feature table.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// Features for every (patch, date) cell, row index = patch * dates + date.
FeatureMatrix build_feature_matrix(const ScorePanel& panel, const raster::PatchGrid& grid,
                                   const FeatureOptions& options = {}, int jobs = 1);

}  // namespace destrack::smoother
