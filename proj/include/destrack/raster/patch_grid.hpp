#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "destrack/raster/aoi.hpp"
#include "destrack/raster/geo_raster.hpp"

namespace destrack::raster {

inline constexpr int kDefaultPatchSize = 64;

struct PatchId {
    int row = 0;
    int col = 0;
    friend constexpr auto operator<=>(const PatchId&, const PatchId&) = default;
};

/// Half-open pixel window [row0, row0+size) x [col0, col0+size).
struct PixelWindow {
    int row0 = 0;
    int col0 = 0;
    int size = 0;
};

/// Fixed, non-overlapping tiling of a city's raster stack. Included patches
/// are stored in row-major order; their position in that order is the
/// "patch index" used by every dense panel in the library.
class PatchGrid {
public:
    PatchGrid(std::string city_id, int patch_size, int rows, int cols, std::vector<PatchId> included,
              std::vector<PatchId> no_analysis);

    const std::string& city_id() const { return city_id_; }
    int patch_size() const { return patch_size_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    std::span<const PatchId> included() const { return included_; }
    std::size_t size() const { return included_.size(); }
    const PatchId& patch(std::size_t index) const { return included_[index]; }

    std::optional<std::size_t> index_of(PatchId id) const;
    bool contains(PatchId id) const { return index_of(id).has_value(); }
    bool is_no_analysis(std::size_t index) const { return no_analysis_[index] != 0; }
    bool is_no_analysis(PatchId id) const;
    std::size_t no_analysis_count() const;

    PixelWindow window(PatchId id) const { return {id.row * patch_size_, id.col * patch_size_, patch_size_}; }
    /// Center of the window in continuous pixel coordinates.
    PixelCoord center(PatchId id) const {
        return {id.col * patch_size_ + patch_size_ / 2.0, id.row * patch_size_ + patch_size_ / 2.0};
    }

private:
    std::string city_id_;
    int patch_size_;
    int rows_;
    int cols_;
    std::vector<PatchId> included_;
    std::vector<std::int32_t> lookup_;      // rows*cols -> included index or -1
    std::vector<std::uint8_t> no_analysis_;  // per included index
};

/// A pre/post crop pair for one patch, HWC uint8, values untouched.
struct PatchSample {
    PatchId patch_id;
    std::vector<std::uint8_t> pre_pixels;
    std::vector<std::uint8_t> post_pixels;
    Date post_date;
};

/// Tiles the raster and keeps patches whose window center lies inside any
/// PopulatedArea ring; flags those whose center lies in a NoAnalysisZone.
/// Throws DimensionError if the raster is smaller than one patch and
/// ConfigError if no PopulatedArea AOI is given.
PatchGrid build_grid(const GeoRaster& raster, std::span<const AreaOfInterest> aois,
                     int patch_size = kDefaultPatchSize);

/// Patch whose window contains the coordinate, if it is an included patch.
std::optional<PatchId> point_to_patch(const PatchGrid& grid, const GeoTransform& geo, int width, int height,
                                      LonLat lonlat);
inline std::optional<PatchId> point_to_patch(const PatchGrid& grid, const GeoRaster& raster, LonLat lonlat) {
    return point_to_patch(grid, raster.geo(), raster.width(), raster.height(), lonlat);
}

/// Copies the pre and post crops of one included patch. Throws LookupError
/// for a patch outside the grid and DimensionError if the rasters are not
/// co-registered.
PatchSample extract_sample(const GeoRaster& pre, const GeoRaster& post, const PatchGrid& grid, PatchId id);

/// Copies one window out of a raster (HWC).
std::vector<std::uint8_t> crop(const GeoRaster& raster, PixelWindow window);

}  // namespace destrack::raster
