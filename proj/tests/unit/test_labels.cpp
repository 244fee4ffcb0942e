#include <doctest.h>

#include <algorithm>
#include <map>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"
#include "destrack/labels/io.hpp"
#include "destrack/labels/labels.hpp"
#include "destrack/labels/propagate.hpp"
#include "destrack/labels/split.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace destrack;
using namespace destrack::labels;
using raster::PatchId;

namespace {

const raster::GeoTransform kGeo{10.0, 20.0, 0.001};

raster::PatchGrid full_grid(int rows, int cols, std::vector<PatchId> no_analysis = {}) {
    std::vector<PatchId> inc;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) inc.push_back({r, c});
    return raster::PatchGrid("c", 64, rows, cols, inc, std::move(no_analysis));
}

raster::LonLat pixel_lonlat(double x, double y) { return kGeo.to_lonlat({x, y}); }

Date day(int d) { return Date(2015, 1, 1).plus_days(d); }

}  // namespace

TEST_CASE("label_at_annotation_date examples") {
    const auto grid = full_grid(4, 5);
    const std::vector<Date> ann{day(0)};
    const auto center = pixel_lonlat(3 * 64 + 10, 2 * 64 + 50);

    auto l = label_at_annotation_date(grid, kGeo, 320, 256, std::vector<Annotation>{{center, day(0), DamageClass::Destroyed}},
                                      day(0), ann);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(l[i] == (grid.patch(i) == PatchId{2, 3} ? Label::Destroyed : Label::Intact));

    l = label_at_annotation_date(grid, kGeo, 320, 256, std::vector<Annotation>{{center, day(0), DamageClass::Severe}},
                                 day(0), ann);
    CHECK(l[*grid.index_of({2, 3})] == Label::Unknown);
    CHECK(std::count(l.begin(), l.end(), Label::Intact) == 19);

    CHECK_THROWS_AS(label_at_annotation_date(grid, kGeo, 320, 256, std::vector<Annotation>{}, day(5), ann), ConfigError);
    CHECK_THROWS_AS(label_at_annotation_date(grid, kGeo, 320, 256,
                                             std::vector<Annotation>{{center, day(3), DamageClass::Destroyed}}, day(0), ann),
                    ConfigError);
}

TEST_CASE("label_at_annotation_date matches a point-in-window oracle") {
    const auto grid = full_grid(6, 6, {{0, 5}, {1, 5}});
    Rng rng(21);
    std::vector<Annotation> anns;
    for (int i = 0; i < 100; ++i) {
        const DamageClass cls = rng.bernoulli(0.7) ? DamageClass::Destroyed : DamageClass::Moderate;
        anns.push_back({pixel_lonlat(rng.uniform(-20, 400), rng.uniform(-20, 400)), day(0), cls});
    }
    const std::vector<Date> ann{day(0)};
    const auto l = label_at_annotation_date(grid, kGeo, 384, 384, anns, day(0), ann);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto id = grid.patch(i);
        bool destroyed = false, other = false;
        for (const auto& a : anns) {
            const auto p = kGeo.to_pixel(a.lonlat);
            if (p.x >= id.col * 64 && p.x < id.col * 64 + 64 && p.y >= id.row * 64 && p.y < id.row * 64 + 64)
                (a.damage_class == DamageClass::Destroyed ? destroyed : other) = true;
        }
        Label want = destroyed ? Label::Destroyed : other ? Label::Unknown : Label::Intact;
        if (grid.is_no_analysis(i)) want = Label::Unknown;
        CHECK(l[i] == want);
    }
}

TEST_CASE("propagate worked cases") {
    const std::vector<Date> img{day(1), day(2), day(3), day(4), day(5)};
    auto run = [&](std::vector<std::pair<int, Label>> t) {
        std::vector<AnnotationSnapshot> snaps;
        for (auto& [d, l] : t) snaps.push_back({day(d), {l}});
        const auto p = propagate(snaps, img);
        std::vector<Label> out;
        for (std::size_t i = 0; i < img.size(); ++i) out.push_back(p.at(0, i));
        return out;
    };
    using enum Label;
    CHECK(run({{2, Intact}, {4, Destroyed}}) == std::vector<Label>{Intact, Intact, Unknown, Destroyed, Destroyed});
    CHECK(run({{2, Intact}, {4, Intact}}) == std::vector<Label>{Intact, Intact, Intact, Intact, Unknown});
    CHECK(run({{2, Destroyed}}) == std::vector<Label>{Unknown, Destroyed, Destroyed, Destroyed, Destroyed});
    CHECK_THROWS_AS(propagate(std::vector<AnnotationSnapshot>{}, img), ConfigError);
}

TEST_CASE("propagate_at matches the case oracle on every short timeline") {
    // Each of 6 dates is absent / Intact / Destroyed / Unknown.
    int cases = 0;
    for (int code = 0; code < 4 * 4 * 4 * 4 * 4 * 4; ++code) {
        std::vector<std::pair<int, Label>> t;
        std::vector<TimelineEntry> entries;
        int c = code;
        for (int d = 0; d < 6; ++d, c /= 4) {
            if (c % 4 == 0) continue;
            const Label l = c % 4 == 1 ? Label::Intact : c % 4 == 2 ? Label::Destroyed : Label::Unknown;
            t.push_back({d, l});
            entries.push_back({day(d), l});
        }
        for (int q = -1; q <= 6; ++q, ++cases) CHECK(propagate_at(entries, day(q)) == oracles::propagation_case(t, q));
    }
    CHECK(cases >= 10000);
}

TEST_CASE("propagation is idempotent and never reverts destruction") {
    Rng rng(22);
    std::vector<Date> img;
    for (int d = 0; d < 12; ++d) img.push_back(day(d));
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<AnnotationSnapshot> snaps;
        for (int d = 0; d < 12; ++d) {
            if (!rng.bernoulli(0.35)) continue;
            std::vector<Label> ls(5);
            for (auto& l : ls) l = static_cast<Label>(rng.below(3));
            snaps.push_back({day(d), ls});
        }
        if (snaps.empty()) continue;
        // Keep the no-reconstruction assumption in the input itself.
        for (std::size_t p = 0; p < 5; ++p) {
            bool gone = false;
            for (auto& s : snaps) {
                if (gone && s.labels[p] == Label::Intact) s.labels[p] = Label::Destroyed;
                gone = gone || s.labels[p] == Label::Destroyed;
            }
        }
        const auto once = propagate(snaps, img);
        CHECK(is_monotone(once));
        std::vector<AnnotationSnapshot> again;
        for (std::size_t t = 0; t < img.size(); ++t) {
            std::vector<Label> ls;
            for (std::size_t p = 0; p < 5; ++p) ls.push_back(once.at(p, t));
            again.push_back({img[t], ls});
        }
        const auto twice = propagate(again, img);
        for (std::size_t p = 0; p < 5; ++p)
            for (std::size_t t = 0; t < img.size(); ++t)
                if (once.at(p, t) != Label::Unknown) CHECK(twice.at(p, t) == once.at(p, t));
    }
}

TEST_CASE("bind_annotation_dates") {
    const std::vector<Date> img{day(0), day(10), day(20)};
    CHECK(bind_annotation_dates(std::vector<Date>{day(10)}, img, DateBinding::Exact) == std::vector<Date>{day(10)});
    CHECK_THROWS_AS(bind_annotation_dates(std::vector<Date>{day(11)}, img, DateBinding::Exact), ConfigError);
    CHECK(bind_annotation_dates(std::vector<Date>{day(14)}, img, DateBinding::Nearest) == std::vector<Date>{day(10)});
    CHECK(bind_annotation_dates(std::vector<Date>{day(15)}, img, DateBinding::Nearest) == std::vector<Date>{day(10)});
    CHECK_THROWS_AS(bind_annotation_dates(std::vector<Date>{day(9), day(11)}, img, DateBinding::Nearest), ConfigError);
}

TEST_CASE("split_patches") {
    std::vector<PatchId> ids;
    for (int r = 0; r < 100; ++r)
        for (int c = 0; c < 100; ++c) ids.push_back({r, c});
    const auto a = split_patches(ids, 0.7, 9);
    CHECK(a == split_patches(ids, 0.7, 9));
    const auto train = a.count(Split::Train);
    CHECK(train >= 6900);
    CHECK(train <= 7100);
    CHECK(train + a.count(Split::Test) == ids.size());
    CHECK_THROWS_AS(split_patches(ids, 1.0, 9), ConfigError);

    // Assignment of a patch does not depend on the rest of the list.
    std::vector<PatchId> subset(ids.begin(), ids.begin() + 3000);
    const auto b = split_patches(subset, 0.7, 9);
    std::size_t same = 0;
    for (const auto& id : subset) same += a.of(id) == b.of(id);
    CHECK(same >= 2900);
    CHECK_THROWS_AS(a.of({500, 500}), LookupError);
}

TEST_CASE("balance_indices") {
    auto counts = [](const std::vector<Label>& ls) {
        std::map<std::size_t, int> c;
        for (auto i : balance_indices(ls)) ++c[i];
        return c;
    };
    std::vector<Label> ls(12, Label::Intact);
    for (int i = 0; i < 3; ++i) ls[i * 4] = Label::Destroyed;
    auto c = counts(ls);
    for (int i = 0; i < 3; ++i) CHECK(c[i * 4] == 3);

    std::vector<Label> ls2(14, Label::Intact);
    for (int i = 0; i < 4; ++i) ls2[i] = Label::Destroyed;
    ls2.push_back(Label::Unknown);
    c = counts(ls2);
    int pos = 0, lo = 99, hi = 0;
    for (int i = 0; i < 4; ++i) {
        pos += c[i];
        lo = std::min(lo, c[i]);
        hi = std::max(hi, c[i]);
    }
    CHECK(pos == 10);
    CHECK(hi - lo <= 1);
    CHECK(c.count(14) == 0);

    const std::vector<Label> even{Label::Destroyed, Label::Intact};
    CHECK(balance_indices(even) == std::vector<std::size_t>{0, 1});
    CHECK_THROWS_AS(balance_indices(std::vector<Label>{Label::Intact, Label::Unknown}), ClassError);
}

TEST_CASE("label and split files round trip") {
    const auto dir = test_support::scratch_dir("labels_io");
    const auto grid = full_grid(3, 3);
    const std::vector<Date> img{day(0), day(5)};
    LabelPanel p(grid.size(), {}, img);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        p.set(i, 0, static_cast<Label>(i % 3));
        p.set(i, 1, Label::Destroyed);
    }
    write_label_panel(p, grid, dir / "labels.csv");
    CHECK(read_label_panel(dir / "labels.csv", grid, {}) == p);

    const std::vector<PatchId> ids(grid.included().begin(), grid.included().end());
    const auto s = split_patches(ids, 0.5, 3);
    write_split(s, dir / "split.csv");
    CHECK(read_split(dir / "split.csv", 0.5, 3) == s);

    const std::vector<Annotation> anns{{{1.5, 2.25}, day(3), DamageClass::Severe}};
    write_annotations(anns, dir / "a.csv");
    const auto back = read_annotations(dir / "a.csv");
    REQUIRE(back.size() == 1);
    CHECK(back[0].lonlat.lon == 1.5);
    CHECK(back[0].damage_class == DamageClass::Severe);
}
