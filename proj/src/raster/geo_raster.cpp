#include "destrack/raster/geo_raster.hpp"

#include <cmath>

#include "destrack/common/error.hpp"

namespace destrack::raster {

GeoRaster::GeoRaster(int width, int height, int channels, std::vector<std::uint8_t> pixels, GeoTransform geo,
                     Date capture_date, std::string city_id)
    : width_(width),
      height_(height),
      channels_(channels),
      pixels_(std::move(pixels)),
      geo_(geo),
      capture_date_(capture_date),
      city_id_(std::move(city_id)) {
    if (width <= 0 || height <= 0 || channels <= 0)
        throw DimensionError("raster dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * channels)
        throw DimensionError("raster pixel buffer has " + std::to_string(pixels_.size()) + " bytes, expected " +
                             std::to_string(static_cast<std::size_t>(width) * height * channels));
    if (!(geo.pixel_deg > 0.0) || !std::isfinite(geo.pixel_deg))
        throw ConfigError("pixel size must be strictly positive");
}

bool GeoRaster::co_registered_with(const GeoRaster& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_ &&
           geo_ == other.geo_;
}

}  // namespace destrack::raster
