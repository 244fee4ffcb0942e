#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "destrack/common/date.hpp"
#include "destrack/event_study/event_study.hpp"
#include "destrack/labels/labels.hpp"
#include "destrack/labels/propagate.hpp"
#include "destrack/raster/aoi.hpp"
#include "destrack/raster/geo_raster.hpp"
#include "destrack/raster/patch_grid.hpp"

namespace destrack::synth {

inline constexpr int kCellSize = 32;
inline constexpr int kStreetEvery = 4;   // cells between streets
inline constexpr int kStreetWidth = 6;   // pixels, centered on the cell boundary
inline constexpr int kCellMargin = 4;    // building clearance from cell edges

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
    bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
    bool overlaps(const Rect& o) const { return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

struct Building {
    int id = 0;
    Rect footprint;
    std::array<std::uint8_t, 3> color{};
    int roof_style = 0;  // 0 gabled, 1 flat with parapet

    raster::PixelCoord centroid() const {
        return {footprint.x + footprint.w / 2.0, footprint.y + footprint.h / 2.0};
    }
    friend bool operator==(const Building&, const Building&) = default;
};

struct CityConfig {
    std::string city_id = "synth";
    int width = 1024;
    int height = 1024;
    /// Probability that a free lattice cell holds a building.
    double building_density = 0.75;
    double destruction_share = 0.03;
    std::uint64_t seed = 1;
    int date_count = 22;
    double park_share = 0.05;
    bool clustered = true;
    int cluster_size = 8;
    raster::GeoTransform geo{37.10, 36.25, 5e-6};
};

struct CityModel {
    std::string city_id;
    int width = 0;
    int height = 0;
    raster::GeoTransform geo;
    std::vector<Building> buildings;  // id == index
    std::vector<Rect> streets;
    std::vector<Rect> parks;
    /// building id -> first date index showing rubble, in [1, date_count)
    std::map<int, int> destruction_schedule;
    int date_count = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const CityModel&, const CityModel&) = default;
};

/// Buildings on a jittered 32 px lattice between streets and parks, with
/// round(share * buildings) of them destroyed. Throws ConfigError on an
/// infeasible configuration.
CityModel generate_city(const CityConfig& config);
CityModel generate_city(int width, int height, double building_density, double destruction_share,
                        std::uint64_t seed);

struct RubbleParams {
    int fragment_px = 3;
    int gray_lo = 60;
    int gray_hi = 200;
    double darkening = 0.8;
};

struct RenderSpec {
    int date_count = 22;
    std::vector<int> annotation_date_indices{5, 10, 15, 21};
    /// Amplitude of the per-date gain/offset/color-cast jitter.
    double illumination_shift = 0.1;
    double noise_sigma = 4.0;
    /// Transient debris-like clutter (vehicles, stalls, dumped material)
    /// drawn per date at random spots, in expected blobs per megapixel.
    double clutter_density = 250.0;
    RubbleParams rubble;
    Date start_date{2013, 9, 23};
    int date_step_days = 73;

    /// Throws ConfigError if indices fall outside [0, date_count) or repeat.
    void validate() const;
};

/// Capture dates, index 0 being the pre image.
std::vector<Date> image_dates(const RenderSpec& spec);
std::vector<Date> annotation_dates(const RenderSpec& spec);

/// At each annotation date, one Destroyed point at the centroid of every
/// building destroyed on or before it.
std::vector<labels::Annotation> emit_annotations(const CityModel& city, const RenderSpec& spec);

/// True labels: Destroyed iff a building destroyed by that date has its
/// centroid in the patch. `dates` must be image dates of `spec`.
labels::LabelPanel ground_truth_panel(const CityModel& city, const RenderSpec& spec, const raster::PatchGrid& grid,
                                      std::span<const Date> dates);

/// Populated area over the whole extent plus a patch-aligned no-analysis
/// block in the top-right corner covering about `no_analysis_share` of the
/// patches (none when 0).
std::vector<raster::AreaOfInterest> city_aois(const CityModel& city, double no_analysis_share = 0.04,
                                              int patch_size = raster::kDefaultPatchSize);

/// One strike per destroyed building, dated after the previous image and
/// on or before the destruction image, plus `decoy_share` times as many
/// strikes at random buildings and dates.
std::vector<event_study::EventRecord> emit_events(const CityModel& city, const RenderSpec& spec,
                                                  double decoy_share = 0.1);

}  // namespace destrack::synth
