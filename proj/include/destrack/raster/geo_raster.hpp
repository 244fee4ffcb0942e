#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "destrack/common/date.hpp"

namespace destrack::raster {

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
};

/// Continuous pixel coordinates: x grows to the right (columns), y grows
/// downwards (rows). Pixel (i, j) covers [j, j+1) x [i, i+1).
struct PixelCoord {
    double x = 0.0;
    double y = 0.0;
};

/// North-up, axis-aligned affine transform. The origin is the top-left
/// corner of pixel (0, 0); latitude decreases with row index.
struct GeoTransform {
    double origin_lon = 0.0;
    double origin_lat = 0.0;
    double pixel_deg = 1.0;

    LonLat to_lonlat(PixelCoord p) const { return {origin_lon + p.x * pixel_deg, origin_lat - p.y * pixel_deg}; }
    PixelCoord to_pixel(LonLat g) const {
        return {(g.lon - origin_lon) / pixel_deg, (origin_lat - g.lat) / pixel_deg};
    }

    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

/// Georeferenced 8-bit image, interleaved row-major (HWC).
class GeoRaster {
public:
    GeoRaster() = default;
    /// Throws DimensionError if pixels.size() != width*height*channels or any
    /// dimension is zero, ConfigError if pixel_deg is not strictly positive.
    GeoRaster(int width, int height, int channels, std::vector<std::uint8_t> pixels, GeoTransform geo,
              Date capture_date, std::string city_id);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    const GeoTransform& geo() const { return geo_; }
    const Date& capture_date() const { return capture_date_; }
    const std::string& city_id() const { return city_id_; }
    std::span<const std::uint8_t> pixels() const { return pixels_; }

    std::uint8_t at(int row, int col, int channel) const {
        return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
    }

    /// Same dimensions and identical affine transform.
    bool co_registered_with(const GeoRaster& other) const;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> pixels_;
    GeoTransform geo_;
    Date capture_date_;
    std::string city_id_;
};

}  // namespace destrack::raster
