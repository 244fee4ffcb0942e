#pragma once

#include <cstdint>
#include <vector>

#include "destrack/raster/geo_raster.hpp"
#include "destrack/synth/city.hpp"

namespace destrack::synth {

/// Holds the date-independent scene so several dates can be rendered
/// without redrawing it.
class Renderer {
public:
    Renderer(const CityModel& city, RenderSpec spec);

    /// Pure function of (city, spec, date_index). Throws ConfigError if the
    /// index is outside [0, date_count).
    raster::GeoRaster render(int date_index) const;

private:
    const CityModel& city_;
    RenderSpec spec_;
    std::vector<Date> dates_;
    std::vector<std::uint8_t> base_;  // H x W x 3
};

raster::GeoRaster render(const CityModel& city, const RenderSpec& spec, int date_index);

}  // namespace destrack::synth
