#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "destrack/raster/aoi.hpp"
#include "destrack/raster/geo_raster.hpp"
#include "destrack/raster/patch_grid.hpp"

namespace destrack::raster {

/// Metadata from a raster's JSON sidecar, enough to locate and order it
/// without decoding pixels.
struct RasterHeader {
    std::filesystem::path png_path;
    std::filesystem::path sidecar_path;
    GeoTransform geo;
    Date capture_date;
    std::string city_id;
};

/// `<stem>.png` -> `<stem>.json`
std::filesystem::path sidecar_path_for(const std::filesystem::path& png_path);

RasterHeader read_header(const std::filesystem::path& png_path);

/// Decodes an 8-bit RGB PNG plus sidecar. Throws InputError / FormatError.
GeoRaster read_raster(const std::filesystem::path& png_path);

/// Writes `png_path` and its sidecar. compression_level follows zlib (0-9).
void write_raster(const GeoRaster& raster, const std::filesystem::path& png_path, int compression_level = 1);

/// All rasters in a directory (every *.png with a sidecar), sorted by
/// capture date. Throws InputError if the directory holds none.
std::vector<RasterHeader> list_raster_dir(const std::filesystem::path& dir);

/// AOI JSON: {"kind": "populated_area"|"no_analysis_zone", "rings": [[[lon,lat],...],...]}
AreaOfInterest read_aoi(const std::filesystem::path& path);
void write_aoi(const AreaOfInterest& aoi, const std::filesystem::path& path);
/// A single area object or a JSON array of them.
std::vector<AreaOfInterest> read_aois(const std::filesystem::path& path);
void write_aois(std::span<const AreaOfInterest> aois, const std::filesystem::path& path);

/// CSV columns city_id,row,col,included,no_analysis over every grid cell.
void write_grid_csv(const PatchGrid& grid, const std::filesystem::path& path);
PatchGrid read_grid_csv(const std::filesystem::path& path, int patch_size = kDefaultPatchSize);

}  // namespace destrack::raster
