#include <doctest.h>

#include <algorithm>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"
#include "destrack/raster/io.hpp"
#include "destrack/raster/patch_grid.hpp"
#include "support.hpp"

using namespace destrack;
using namespace destrack::raster;

namespace {

const GeoTransform kGeo{30.0, 40.0, 0.01};

GeoRaster constant(int w, int h, std::uint8_t v, Date d = Date(2014, 1, 1)) {
    return GeoRaster(w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, v), kGeo, d, "c");
}

// Pixel-space rectangle as a lon/lat ring.
Ring rect_ring(double x0, double y0, double x1, double y1) {
    return {kGeo.to_lonlat({x0, y0}), kGeo.to_lonlat({x1, y0}), kGeo.to_lonlat({x1, y1}), kGeo.to_lonlat({x0, y1}),
            kGeo.to_lonlat({x0, y0})};
}

AreaOfInterest populated(double x0, double y0, double x1, double y1) {
    return AreaOfInterest(AoiKind::PopulatedArea, {rect_ring(x0, y0, x1, y1)});
}

}  // namespace

TEST_CASE("geo raster invariants") {
    CHECK_THROWS_AS(GeoRaster(2, 2, 3, std::vector<std::uint8_t>(11), kGeo, Date(2014, 1, 1), "c"), DimensionError);
    CHECK_THROWS_AS(GeoRaster(2, 2, 3, std::vector<std::uint8_t>(12), GeoTransform{0, 0, 0}, Date(2014, 1, 1), "c"),
                    ConfigError);
    const auto p = kGeo.to_pixel(kGeo.to_lonlat({12.5, 7.25}));
    CHECK(p.x == doctest::Approx(12.5));
    CHECK(p.y == doctest::Approx(7.25));
}

TEST_CASE("aoi rings are validated") {
    CHECK_THROWS_AS(AreaOfInterest(AoiKind::PopulatedArea, {{{0, 0}, {1, 0}, {0, 0}}}), ConfigError);
    CHECK_THROWS_AS(AreaOfInterest(AoiKind::PopulatedArea, {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}), ConfigError);
    // Bow tie.
    CHECK_THROWS_AS(AreaOfInterest(AoiKind::PopulatedArea, {{{0, 0}, {1, 1}, {1, 0}, {0, 1}, {0, 0}}}), ConfigError);
}

TEST_CASE("build_grid examples") {
    const auto r = constant(128, 128, 0);
    const std::vector<AreaOfInterest> all{populated(0, 0, 128, 128)};
    const auto g = build_grid(r, all);
    CHECK(g.rows() == 2);
    CHECK(g.cols() == 2);
    CHECK(g.size() == 4);

    const std::vector<AreaOfInterest> left{populated(0, 0, 64, 128)};
    const auto h = build_grid(r, left);
    REQUIRE(h.size() == 2);
    CHECK(h.patch(0) == PatchId{0, 0});
    CHECK(h.patch(1) == PatchId{1, 0});

    CHECK_THROWS_AS(build_grid(constant(63, 200, 0), all), DimensionError);
    CHECK_THROWS_AS(build_grid(r, std::vector<AreaOfInterest>{}), ConfigError);
    const std::vector<AreaOfInterest> only_zone{AreaOfInterest(AoiKind::NoAnalysisZone, {rect_ring(0, 0, 128, 128)})};
    CHECK_THROWS_AS(build_grid(r, only_zone), ConfigError);
}

TEST_CASE("large full-cover grid") {
    const GeoRaster big(6400, 6400, 3, std::vector<std::uint8_t>(6400ull * 6400 * 3), kGeo, Date(2014, 1, 1), "c");
    const std::vector<AreaOfInterest> all{populated(0, 0, 6400, 6400)};
    CHECK(build_grid(big, all).size() == 10000);
}

TEST_CASE("grid membership follows window centers and no-analysis zones") {
    Rng rng(31);
    const auto r = constant(640, 448, 0);
    for (int rep = 0; rep < 30; ++rep) {
        const double x0 = rng.uniform(0, 300), y0 = rng.uniform(0, 200);
        const double x1 = x0 + rng.uniform(40, 340), y1 = y0 + rng.uniform(40, 240);
        const double zx = rng.uniform(0, 500), zy = rng.uniform(0, 300);
        const std::vector<AreaOfInterest> aois{
            populated(x0, y0, x1, y1),
            AreaOfInterest(AoiKind::NoAnalysisZone, {rect_ring(zx, zy, zx + 100, zy + 100)})};
        const auto g = build_grid(r, aois);
        CHECK(g.size() <= 10u * 7u);
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 10; ++col) {
                const double cx = col * 64 + 32, cy = row * 64 + 32;
                const bool in = cx > x0 && cx < x1 && cy > y0 && cy < y1;
                CHECK(g.contains({row, col}) == in);
                if (in) {
                    const bool zone = cx > zx && cx < zx + 100 && cy > zy && cy < zy + 100;
                    CHECK(g.is_no_analysis(PatchId{row, col}) == zone);
                }
            }
        // Enlarging the populated area never drops a patch.
        const std::vector<AreaOfInterest> bigger{populated(x0 - 30, y0 - 30, x1 + 30, y1 + 30)};
        const auto g2 = build_grid(r, bigger);
        for (const auto& id : g.included()) CHECK(g2.contains(id));
    }
}

TEST_CASE("point_to_patch") {
    const auto r = constant(640, 512, 0);
    const std::vector<AreaOfInterest> all{populated(0, 0, 640, 512)};
    const auto g = build_grid(r, all);
    CHECK(point_to_patch(g, r, kGeo.to_lonlat({0, 0})) == PatchId{0, 0});
    CHECK_FALSE(point_to_patch(g, r, kGeo.to_lonlat({-1, 0})).has_value());
    for (const auto& id : g.included()) {
        const auto c = g.center(id);
        CHECK(point_to_patch(g, r, kGeo.to_lonlat(c)) == id);
    }
    CHECK(point_to_patch(g, r, kGeo.to_lonlat({7 * 64 + 32, 3 * 64 + 32})) == PatchId{3, 7});
}

TEST_CASE("extract_sample") {
    const auto pre = constant(192, 128, 0);
    const auto post = constant(192, 128, 255, Date(2015, 1, 1));
    const std::vector<AreaOfInterest> all{populated(0, 0, 192, 128)};
    const auto g = build_grid(pre, all);
    const auto s = extract_sample(pre, post, g, {1, 2});
    CHECK(s.pre_pixels.size() == 64 * 64 * 3);
    CHECK(std::all_of(s.pre_pixels.begin(), s.pre_pixels.end(), [](auto v) { return v == 0; }));
    CHECK(std::all_of(s.post_pixels.begin(), s.post_pixels.end(), [](auto v) { return v == 255; }));
    CHECK(s.post_date == Date(2015, 1, 1));
    CHECK_THROWS_AS(extract_sample(pre, post, g, {5, 5}), LookupError);
    const GeoRaster shifted(192, 128, 3, std::vector<std::uint8_t>(192 * 128 * 3), GeoTransform{30.5, 40, 0.01},
                            Date(2015, 1, 1), "c");
    CHECK_THROWS_AS(extract_sample(pre, shifted, g, {0, 0}), DimensionError);

    // Crop offsets: pixel (row, col) carries its own coordinates.
    std::vector<std::uint8_t> px(192 * 128 * 3);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 192; ++x) {
            px[(y * 192 + x) * 3] = static_cast<std::uint8_t>(x);
            px[(y * 192 + x) * 3 + 1] = static_cast<std::uint8_t>(y);
        }
    const GeoRaster coords(192, 128, 3, px, kGeo, Date(2015, 1, 1), "c");
    const auto last = extract_sample(pre, coords, g, {1, 2});
    CHECK(last.post_pixels[0] == 128);
    CHECK(last.post_pixels[1] == 64);
    CHECK(last.post_pixels[(63 * 64 + 63) * 3] == 191);
}

TEST_CASE("raster, aoi and grid files round trip") {
    const auto dir = test_support::scratch_dir("raster_io");
    std::vector<std::uint8_t> px(70 * 65 * 3);
    Rng rng(5);
    for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
    const GeoRaster r(70, 65, 3, px, kGeo, Date(2014, 3, 4), "alpha");
    write_raster(r, dir / "2014-03-04.png");
    const auto back = read_raster(dir / "2014-03-04.png");
    CHECK(back.width() == 70);
    CHECK(back.capture_date() == Date(2014, 3, 4));
    CHECK(back.geo() == kGeo);
    CHECK(back.city_id() == "alpha");
    CHECK(std::equal(px.begin(), px.end(), back.pixels().begin()));
    CHECK(list_raster_dir(dir).size() == 1);
    CHECK_THROWS_AS(list_raster_dir(dir / "nothing"), InputError);

    const std::vector<AreaOfInterest> aois{populated(0, 0, 64, 64),
                                           AreaOfInterest(AoiKind::NoAnalysisZone, {rect_ring(0, 0, 10, 10)})};
    write_aois(aois, dir / "aoi.json");
    const auto a2 = read_aois(dir / "aoi.json");
    REQUIRE(a2.size() == 2);
    CHECK(a2[1].kind() == AoiKind::NoAnalysisZone);
    CHECK(a2[0].rings()[0].size() == 5);

    const GeoRaster big(256, 192, 3, std::vector<std::uint8_t>(256 * 192 * 3), kGeo, Date(2014, 1, 1), "alpha");
    const std::vector<AreaOfInterest> half{populated(0, 0, 150, 192),
                                           AreaOfInterest(AoiKind::NoAnalysisZone, {rect_ring(0, 0, 64, 64)})};
    const auto g = build_grid(big, half);
    write_grid_csv(g, dir / "grid.csv");
    const auto g2 = read_grid_csv(dir / "grid.csv");
    CHECK(g2.size() == g.size());
    CHECK(g2.rows() == g.rows());
    CHECK(g2.cols() == g.cols());
    CHECK(g2.no_analysis_count() == 1);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g2.patch(i) == g.patch(i));
}
