#include "destrack/raster/patch_grid.hpp"

#include <algorithm>
#include <cmath>

#include "destrack/common/error.hpp"

namespace destrack::raster {

PatchGrid::PatchGrid(std::string city_id, int patch_size, int rows, int cols, std::vector<PatchId> included,
                     std::vector<PatchId> no_analysis)
    : city_id_(std::move(city_id)),
      patch_size_(patch_size),
      rows_(rows),
      cols_(cols),
      included_(std::move(included)),
      lookup_(static_cast<std::size_t>(rows) * cols, -1) {
    if (patch_size <= 0 || rows < 0 || cols < 0) throw DimensionError("invalid grid dimensions");
    std::sort(included_.begin(), included_.end());
    included_.erase(std::unique(included_.begin(), included_.end()), included_.end());
    for (std::size_t i = 0; i < included_.size(); ++i) {
        const auto& p = included_[i];
        if (p.row < 0 || p.row >= rows || p.col < 0 || p.col >= cols)
            throw DimensionError("included patch outside grid");
        lookup_[static_cast<std::size_t>(p.row) * cols + p.col] = static_cast<std::int32_t>(i);
    }
    no_analysis_.assign(included_.size(), 0);
    for (const auto& p : no_analysis) {
        auto idx = index_of(p);
        if (!idx) throw ConfigError("no-analysis patch is not an included patch");
        no_analysis_[*idx] = 1;
    }
}

std::optional<std::size_t> PatchGrid::index_of(PatchId id) const {
    if (id.row < 0 || id.row >= rows_ || id.col < 0 || id.col >= cols_) return std::nullopt;
    const auto v = lookup_[static_cast<std::size_t>(id.row) * cols_ + id.col];
    if (v < 0) return std::nullopt;
    return static_cast<std::size_t>(v);
}

bool PatchGrid::is_no_analysis(PatchId id) const {
    auto idx = index_of(id);
    return idx && no_analysis_[*idx];
}

std::size_t PatchGrid::no_analysis_count() const {
    return static_cast<std::size_t>(std::count(no_analysis_.begin(), no_analysis_.end(), 1));
}

PatchGrid build_grid(const GeoRaster& raster, std::span<const AreaOfInterest> aois, int patch_size) {
    if (patch_size <= 0) throw ConfigError("patch size must be positive");
    if (raster.width() < patch_size || raster.height() < patch_size)
        throw DimensionError("raster " + std::to_string(raster.width()) + "x" + std::to_string(raster.height()) +
                             " is smaller than one " + std::to_string(patch_size) + "px patch");
    const bool has_populated = std::any_of(aois.begin(), aois.end(), [](const AreaOfInterest& a) {
        return a.kind() == AoiKind::PopulatedArea;
    });
    if (!has_populated) throw ConfigError("at least one PopulatedArea AOI is required");

    const int rows = raster.height() / patch_size;
    const int cols = raster.width() / patch_size;
    std::vector<PatchId> included;
    std::vector<PatchId> no_analysis;
    const PatchGrid probe(raster.city_id(), patch_size, rows, cols, {}, {});
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const LonLat center = raster.geo().to_lonlat(probe.center({r, c}));
            bool populated = false;
            bool excluded = false;
            for (const auto& aoi : aois) {
                if (!aoi.contains(center)) continue;
                if (aoi.kind() == AoiKind::PopulatedArea)
                    populated = true;
                else
                    excluded = true;
            }
            if (!populated) continue;
            included.push_back({r, c});
            if (excluded) no_analysis.push_back({r, c});
        }
    }
    return PatchGrid(raster.city_id(), patch_size, rows, cols, std::move(included), std::move(no_analysis));
}

std::optional<PatchId> point_to_patch(const PatchGrid& grid, const GeoTransform& geo, int width, int height,
                                      LonLat lonlat) {
    if (!std::isfinite(lonlat.lon) || !std::isfinite(lonlat.lat)) return std::nullopt;
    const PixelCoord px = geo.to_pixel(lonlat);
    const double col_px = std::floor(px.x);
    const double row_px = std::floor(px.y);
    if (col_px < 0 || row_px < 0 || col_px >= width || row_px >= height) return std::nullopt;
    const PatchId id{static_cast<int>(row_px) / grid.patch_size(), static_cast<int>(col_px) / grid.patch_size()};
    if (!grid.contains(id)) return std::nullopt;
    return id;
}

std::vector<std::uint8_t> crop(const GeoRaster& raster, PixelWindow w) {
    if (w.row0 < 0 || w.col0 < 0 || w.row0 + w.size > raster.height() || w.col0 + w.size > raster.width())
        throw DimensionError("crop window outside raster bounds");
    const int ch = raster.channels();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w.size) * w.size * ch);
    const auto px = raster.pixels();
    const std::size_t row_bytes = static_cast<std::size_t>(w.size) * ch;
    for (int r = 0; r < w.size; ++r) {
        const std::size_t src = (static_cast<std::size_t>(w.row0 + r) * raster.width() + w.col0) * ch;
        std::copy_n(px.begin() + static_cast<std::ptrdiff_t>(src), row_bytes,
                    out.begin() + static_cast<std::ptrdiff_t>(r * row_bytes));
    }
    return out;
}

PatchSample extract_sample(const GeoRaster& pre, const GeoRaster& post, const PatchGrid& grid, PatchId id) {
    if (!grid.contains(id))
        throw LookupError("patch (" + std::to_string(id.row) + "," + std::to_string(id.col) + ") is not included");
    if (!pre.co_registered_with(post)) throw DimensionError("pre and post rasters are not co-registered");
    const auto w = grid.window(id);
    return PatchSample{id, crop(pre, w), crop(post, w), post.capture_date()};
}

}  // namespace destrack::raster
