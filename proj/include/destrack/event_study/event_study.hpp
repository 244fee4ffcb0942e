#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "destrack/common/date.hpp"
#include "destrack/raster/geo_raster.hpp"
#include "destrack/raster/patch_grid.hpp"
#include "destrack/smoother/score_panel.hpp"

namespace destrack::event_study {

inline constexpr int kMaxLead = 5;
inline constexpr int kMaxLag = 5;
inline constexpr int kBinCount = kMaxLead + kMaxLag + 1;  // -5..+5
inline constexpr int kReferenceBin = -(kMaxLead + 1);    // stands for <= -6

struct EventRecord {
    raster::LonLat lonlat;
    Date date;
    std::string event_type;
};

/// Per grid patch, the image index of its earliest event.
struct EventMapping {
    std::vector<std::optional<std::size_t>> event_index;
    std::size_t mapped = 0;
    std::size_t dropped_outside = 0;  // not in any included patch
    std::size_t dropped_date = 0;     // after the last image date
    std::size_t dropped() const { return dropped_outside + dropped_date; }
};

/// Binds each event to its patch and the first image date on or after the
/// event date. Per patch only the earliest bound image index is kept.
EventMapping map_events(std::span<const EventRecord> events, const raster::PatchGrid& grid,
                        const raster::GeoTransform& geo, int width, int height, std::span<const Date> image_dates);

/// Bin column for an event time, or nullopt for the reference (<= -6).
/// Times >= +6 fall into +5.
std::optional<int> bin_of(int event_time);
inline int bin_column(int bin) { return bin + kMaxLead; }

struct EventObservation {
    std::size_t patch = 0;
    std::size_t time = 0;
    double outcome = 0.0;
    std::optional<int> event_time;  // t - event index; absent without event
};

struct EventPanel {
    std::size_t patch_count = 0;
    std::size_t date_count = 0;
    std::vector<EventObservation> obs;
    std::vector<double> design;  // obs x kBinCount indicators, row-major
};

/// One observation per (patch, date) with the given outcomes (patch-major).
EventPanel build_design(std::size_t patches, std::size_t dates, std::span<const double> outcome,
                        std::span<const std::optional<std::size_t>> event_index);
/// Outcome = stage-2 score when present, otherwise stage 1.
EventPanel build_design(const smoother::ScorePanel& panel, const EventMapping& mapping);

struct Demeaned {
    std::vector<double> y;
    std::vector<double> x;  // obs x kBinCount
    int sweeps = 0;         // largest sweep count over columns
};

/// Alternating patch/date demeaning of the outcome and every indicator
/// until the largest change in a sweep is below `tolerance`. Throws
/// NumericError after `max_sweeps`, InputError with fewer than 2 patches
/// or 2 dates.
Demeaned within_transform(const EventPanel& panel, double tolerance = 1e-10, int max_sweeps = 10000);

struct RegressionResult {
    std::array<double, kBinCount> coefficients{};  // bins -5..+5
    std::size_t n_obs = 0;
    bool converged = false;
    int sweeps = 0;

    double at(int bin) const { return bin == kReferenceBin ? 0.0 : coefficients.at(bin_column(bin)); }
};

/// OLS on the two-way demeaned system via column-pivoting QR. Throws
/// CollinearityError naming the first bin outside the numerical rank.
RegressionResult estimate(const EventPanel& panel);

/// CSV bin,coefficient with the reference row first (bin -6, coefficient 0).
void write_coefficients_csv(const RegressionResult& result, const std::filesystem::path& path);

/// CSV lon,lat,date,event_type
std::vector<EventRecord> read_events(const std::filesystem::path& path);
void write_events(std::span<const EventRecord> events, const std::filesystem::path& path);

}  // namespace destrack::event_study
