#include "destrack/synth/city.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"

namespace destrack::synth {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 5> kRoofPalette{{
    {178, 92, 70},   // terracotta
    {150, 150, 155}, // concrete
    {205, 195, 170}, // limestone
    {120, 110, 100}, // weathered
    {165, 125, 95},  // clay
}};

}  // namespace

CityModel generate_city(const CityConfig& cfg) {
    if (cfg.width < raster::kDefaultPatchSize || cfg.height < raster::kDefaultPatchSize)
        throw ConfigError("city extent must be at least one patch in each direction");
    if (!(cfg.building_density >= 0.0 && cfg.building_density <= 1.0))
        throw ConfigError("building_density must be in [0, 1]");
    if (!(cfg.destruction_share >= 0.0 && cfg.destruction_share <= 1.0))
        throw ConfigError("destruction_share must be in [0, 1]");
    if (!(cfg.park_share >= 0.0 && cfg.park_share < 1.0)) throw ConfigError("park_share must be in [0, 1)");
    if (cfg.date_count < 1) throw ConfigError("date_count must be >= 1");
    if (cfg.cluster_size < 1) throw ConfigError("cluster_size must be >= 1");

    Rng rng(derive_seed(cfg.seed, 0xc171));
    CityModel city;
    city.city_id = cfg.city_id;
    city.width = cfg.width;
    city.height = cfg.height;
    city.geo = cfg.geo;
    city.date_count = cfg.date_count;
    city.seed = cfg.seed;

    const int span = kCellSize * kStreetEvery;
    for (int x = span; x < cfg.width; x += span)
        city.streets.push_back({x - kStreetWidth / 2, 0, kStreetWidth, cfg.height});
    for (int y = span; y < cfg.height; y += span)
        city.streets.push_back({0, y - kStreetWidth / 2, cfg.width, kStreetWidth});

    const int cols = cfg.width / kCellSize;
    const int rows = cfg.height / kCellSize;
    std::vector<std::uint8_t> park(static_cast<std::size_t>(rows) * cols, 0);
    // Parks are 2x2 cell blocks inside one street block.
    const std::size_t park_cells_target = static_cast<std::size_t>(std::llround(cfg.park_share * rows * cols));
    std::size_t park_cells = 0;
    for (int attempt = 0; park_cells + 4 <= park_cells_target && attempt < 100000; ++attempt) {
        const int r = static_cast<int>(rng.below(std::max(1, rows - 1)));
        const int c = static_cast<int>(rng.below(std::max(1, cols - 1)));
        if (r + 1 >= rows || c + 1 >= cols) continue;
        if (r / kStreetEvery != (r + 1) / kStreetEvery || c / kStreetEvery != (c + 1) / kStreetEvery) continue;
        bool free = true;
        for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) free = free && !park[(r + dr) * cols + c + dc];
        if (!free) continue;
        for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) park[(r + dr) * cols + c + dc] = 1;
        city.parks.push_back({c * kCellSize + kCellMargin, r * kCellSize + kCellMargin, 2 * kCellSize - 2 * kCellMargin,
                              2 * kCellSize - 2 * kCellMargin});
        park_cells += 4;
    }

    std::vector<int> cell_building(static_cast<std::size_t>(rows) * cols, -1);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (park[r * cols + c]) continue;
            if (!rng.bernoulli(cfg.building_density)) continue;
            Building b;
            b.id = static_cast<int>(city.buildings.size());
            b.footprint.w = 12 + static_cast<int>(rng.below(11));
            b.footprint.h = 12 + static_cast<int>(rng.below(11));
            const int slack_x = kCellSize - 2 * kCellMargin - b.footprint.w;
            const int slack_y = kCellSize - 2 * kCellMargin - b.footprint.h;
            b.footprint.x = c * kCellSize + kCellMargin + static_cast<int>(rng.below(slack_x + 1));
            b.footprint.y = r * kCellSize + kCellMargin + static_cast<int>(rng.below(slack_y + 1));
            auto color = kRoofPalette[rng.below(kRoofPalette.size())];
            for (auto& ch : color) ch = static_cast<std::uint8_t>(std::clamp(ch + static_cast<int>(rng.below(21)) - 10, 0, 255));
            b.color = color;
            b.roof_style = static_cast<int>(rng.below(2));
            cell_building[r * cols + c] = b.id;
            city.buildings.push_back(b);
        }
    if (cfg.building_density > 0.0 && city.buildings.empty())
        throw ConfigError("no room for buildings in a " + std::to_string(cfg.width) + "x" +
                          std::to_string(cfg.height) + " extent");

    const std::size_t n = city.buildings.size();
    const std::size_t target = static_cast<std::size_t>(std::llround(cfg.destruction_share * static_cast<double>(n)));
    if (target == 0 || cfg.date_count < 2) return city;

    auto random_date = [&] { return 1 + static_cast<int>(rng.below(cfg.date_count - 1)); };
    std::vector<std::uint8_t> destroyed(n, 0);
    std::size_t count = 0;
    auto destroy = [&](int id, int date) {
        destroyed[id] = 1;
        city.destruction_schedule[id] = date;
        ++count;
    };
    auto pick_intact = [&] {
        std::size_t k = rng.below(n - count);
        for (std::size_t i = 0; i < n; ++i)
            if (!destroyed[i] && k-- == 0) return static_cast<int>(i);
        return -1;
    };

    if (!cfg.clustered) {
        while (count < target) destroy(pick_intact(), random_date());
        return city;
    }

    auto cell_of = [&](int id) {
        const auto& f = city.buildings[id].footprint;
        return std::pair{f.y / kCellSize, f.x / kCellSize};
    };
    while (count < target) {
        const int seed_id = pick_intact();
        const int cluster_date = random_date();
        auto building_date = [&] { return std::min(cfg.date_count - 1, cluster_date + static_cast<int>(rng.below(2))); };
        destroy(seed_id, building_date());
        std::vector<int> members{seed_id};
        while (members.size() < static_cast<std::size_t>(cfg.cluster_size) && count < target) {
            std::vector<int> frontier;
            for (int m : members) {
                const auto [r, c] = cell_of(m);
                for (int dr = -2; dr <= 2; ++dr)
                    for (int dc = -2; dc <= 2; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                        const int b = cell_building[rr * cols + cc];
                        if (b >= 0 && !destroyed[b]) frontier.push_back(b);
                    }
            }
            std::sort(frontier.begin(), frontier.end());
            frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
            if (frontier.empty()) break;
            const int next = frontier[rng.below(frontier.size())];
            destroy(next, building_date());
            members.push_back(next);
        }
    }
    return city;
}

CityModel generate_city(int width, int height, double building_density, double destruction_share,
                        std::uint64_t seed) {
    CityConfig cfg;
    cfg.width = width;
    cfg.height = height;
    cfg.building_density = building_density;
    cfg.destruction_share = destruction_share;
    cfg.seed = seed;
    return generate_city(cfg);
}

void RenderSpec::validate() const {
    if (date_count < 1) throw ConfigError("date_count must be >= 1");
    if (date_step_days < 1) throw ConfigError("date_step_days must be >= 1");
    if (noise_sigma < 0 || illumination_shift < 0 || clutter_density < 0)
        throw ConfigError("noise, illumination and clutter must be >= 0");
    if (rubble.fragment_px < 1 || rubble.gray_lo < 0 || rubble.gray_hi > 255 || rubble.gray_lo > rubble.gray_hi)
        throw ConfigError("invalid rubble parameters");
    std::set<int> seen;
    for (int i : annotation_date_indices) {
        if (i < 0 || i >= date_count)
            throw ConfigError("annotation date index " + std::to_string(i) + " outside [0, " +
                              std::to_string(date_count) + ")");
        if (!seen.insert(i).second) throw ConfigError("repeated annotation date index " + std::to_string(i));
    }
}

std::vector<Date> image_dates(const RenderSpec& spec) {
    std::vector<Date> out;
    for (int i = 0; i < spec.date_count; ++i) out.push_back(spec.start_date.plus_days(static_cast<long>(i) * spec.date_step_days));
    return out;
}

std::vector<Date> annotation_dates(const RenderSpec& spec) {
    spec.validate();
    const auto dates = image_dates(spec);
    std::vector<int> idx = spec.annotation_date_indices;
    std::sort(idx.begin(), idx.end());
    std::vector<Date> out;
    for (int i : idx) out.push_back(dates[i]);
    return out;
}

std::vector<labels::Annotation> emit_annotations(const CityModel& city, const RenderSpec& spec) {
    spec.validate();
    const auto dates = image_dates(spec);
    std::vector<int> idx = spec.annotation_date_indices;
    std::sort(idx.begin(), idx.end());
    std::vector<labels::Annotation> out;
    for (int a : idx)
        for (const auto& [id, when] : city.destruction_schedule)
            if (when <= a)
                out.push_back({city.geo.to_lonlat(city.buildings[id].centroid()), dates[a],
                               labels::DamageClass::Destroyed});
    return out;
}

labels::LabelPanel ground_truth_panel(const CityModel& city, const RenderSpec& spec, const raster::PatchGrid& grid,
                                      std::span<const Date> dates) {
    const auto all = image_dates(spec);
    std::vector<int> date_idx;
    for (const auto& d : dates) {
        const auto it = std::find(all.begin(), all.end(), d);
        if (it == all.end()) throw LookupError(d.iso() + " is not an image date of the synthetic city");
        date_idx.push_back(static_cast<int>(it - all.begin()));
    }
    labels::LabelPanel panel(grid.size(), annotation_dates(spec), {dates.begin(), dates.end()});
    for (std::size_t p = 0; p < grid.size(); ++p)
        for (std::size_t t = 0; t < dates.size(); ++t) panel.set(p, t, labels::Label::Intact);
    const int ps = grid.patch_size();
    for (const auto& [id, when] : city.destruction_schedule) {
        const auto c = city.buildings[id].centroid();
        const auto p = grid.index_of({static_cast<int>(std::floor(c.y / ps)), static_cast<int>(std::floor(c.x / ps))});
        if (!p) continue;
        for (std::size_t t = 0; t < dates.size(); ++t)
            if (date_idx[t] >= when) panel.set(*p, t, labels::Label::Destroyed);
    }
    return panel;
}

std::vector<raster::AreaOfInterest> city_aois(const CityModel& city, double no_analysis_share, int patch_size) {
    auto rect_ring = [&](double x0, double y0, double x1, double y1) {
        raster::Ring r{city.geo.to_lonlat({x0, y0}), city.geo.to_lonlat({x1, y0}), city.geo.to_lonlat({x1, y1}),
                       city.geo.to_lonlat({x0, y1})};
        r.push_back(r.front());
        return r;
    };
    std::vector<raster::AreaOfInterest> out;
    out.emplace_back(raster::AoiKind::PopulatedArea,
                     std::vector<raster::Ring>{rect_ring(0, 0, city.width, city.height)});
    if (no_analysis_share > 0) {
        const int pr = city.height / patch_size, pc = city.width / patch_size;
        const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(no_analysis_share * pr * pc))));
        const int sr = std::min(side, pr), sc = std::min(side, pc);
        out.emplace_back(raster::AoiKind::NoAnalysisZone,
                         std::vector<raster::Ring>{rect_ring(static_cast<double>(pc - sc) * patch_size, 0,
                                                             static_cast<double>(pc) * patch_size,
                                                             static_cast<double>(sr) * patch_size)});
    }
    return out;
}

std::vector<event_study::EventRecord> emit_events(const CityModel& city, const RenderSpec& spec, double decoy_share) {
    const auto dates = image_dates(spec);
    Rng rng(derive_seed(city.seed, 0xe7e7));
    std::vector<event_study::EventRecord> out;
    auto dated_before = [&](int idx) {
        const long gap = dates[idx].days_since_epoch() - dates[idx - 1].days_since_epoch();
        return dates[idx - 1].plus_days(1 + static_cast<long>(rng.below(gap)));
    };
    for (const auto& [id, when] : city.destruction_schedule)
        out.push_back({city.geo.to_lonlat(city.buildings[id].centroid()), dated_before(when), "airstrike"});
    const auto decoys = static_cast<std::size_t>(std::llround(decoy_share * static_cast<double>(out.size())));
    for (std::size_t k = 0; k < decoys && !city.buildings.empty(); ++k) {
        const auto& b = city.buildings[rng.below(city.buildings.size())];
        const int idx = 1 + static_cast<int>(rng.below(spec.date_count - 1));
        out.push_back({city.geo.to_lonlat(b.centroid()), dated_before(idx), "shelling"});
    }
    return out;
}

}  // namespace destrack::synth
