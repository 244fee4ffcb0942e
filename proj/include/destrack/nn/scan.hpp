#pragma once

#include <functional>
#include <optional>
#include <span>

#include "destrack/nn/network.hpp"
#include "destrack/raster/geo_raster.hpp"
#include "destrack/raster/patch_grid.hpp"
#include "destrack/smoother/score_panel.hpp"

namespace destrack::nn {

/// Returns the post raster for a date, or nullopt when it is unavailable.
using RasterProvider = std::function<std::optional<raster::GeoRaster>(const Date&)>;

/// Scores every included patch (no-analysis patches too) at every post
/// date in inference mode. Rasters are requested one date at a time.
/// Throws InputError if the provider has no raster for a date and
/// DimensionError if a raster is not co-registered with `pre`.
smoother::ScorePanel dense_scan(const NetworkSpec& spec, const NetworkParams& params, const raster::PatchGrid& grid,
                                const raster::GeoRaster& pre, std::span<const Date> post_dates,
                                const RasterProvider& provider, int jobs = 1, int batch_size = 64);

smoother::ScorePanel dense_scan(const NetworkSpec& spec, const NetworkParams& params, const raster::PatchGrid& grid,
                                const raster::GeoRaster& pre, std::span<const raster::GeoRaster> posts,
                                int jobs = 1);

}  // namespace destrack::nn
