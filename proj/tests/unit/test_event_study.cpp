#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"
#include "destrack/event_study/event_study.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace destrack;
using namespace destrack::event_study;
using raster::PatchId;

namespace {

const raster::GeoTransform kGeo{30.0, 40.0, 0.0001};

raster::PatchGrid grid4() {
    std::vector<PatchId> inc;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (!(r == 3 && c == 3)) inc.push_back({r, c});
    return raster::PatchGrid("c", 64, 4, 4, inc, {});
}

RegressionResult fit(const oracles::SimulatedPanel& p) {
    return estimate(build_design(p.patches, p.dates, p.outcome, p.event_index));
}

}  // namespace

TEST_CASE("bin_of") {
    CHECK_FALSE(bin_of(-6).has_value());
    CHECK_FALSE(bin_of(-40).has_value());
    CHECK(*bin_of(-5) == -5);
    CHECK(*bin_of(0) == 0);
    CHECK(*bin_of(5) == 5);
    CHECK(*bin_of(17) == 5);
    CHECK(bin_column(-5) == 0);
    CHECK(bin_column(5) == kBinCount - 1);
}

TEST_CASE("map_events binds to patch and next image date") {
    const auto g = grid4();
    const std::vector<Date> img{Date(2015, 1, 1), Date(2015, 3, 1), Date(2015, 5, 1)};
    auto at = [](double x, double y) { return kGeo.to_lonlat({x, y}); };
    const std::vector<EventRecord> ev{
        {at(64 * 2 + 5, 64 + 5), Date(2015, 2, 1), "airstrike"},    // (1,2) -> index 1
        {at(64 * 2 + 60, 64 + 60), Date(2015, 1, 1), "shelling"},   // (1,2) earlier -> index 0
        {at(10, 10), Date(2015, 3, 1), "airstrike"},                // (0,0) -> index 1, exact date
        {at(10, 10), Date(2015, 6, 1), "airstrike"},                // after the last image
        {at(3 * 64 + 10, 3 * 64 + 10), Date(2015, 1, 1), "x"},      // excluded patch
        {at(-5, 10), Date(2015, 1, 1), "x"},                        // off raster
    };
    const auto m = map_events(ev, g, kGeo, 256, 256, img);
    CHECK(m.mapped == 3);
    CHECK(m.dropped_date == 1);
    CHECK(m.dropped_outside == 2);
    CHECK(m.dropped() == 3);
    CHECK(*m.event_index[*g.index_of({1, 2})] == 0);
    CHECK(*m.event_index[*g.index_of({0, 0})] == 1);
    std::size_t with = 0;
    for (const auto& e : m.event_index) with += e.has_value();
    CHECK(with == 2);
}

TEST_CASE("build_design indicator layout") {
    const std::size_t P = 3, T = 14;
    std::vector<double> y(P * T);
    std::iota(y.begin(), y.end(), 0.0);
    const std::vector<std::optional<std::size_t>> ev{std::nullopt, 7, 0};
    const auto d = build_design(P, T, y, ev);
    REQUIRE(d.obs.size() == P * T);
    CHECK(d.design.size() == P * T * kBinCount);
    for (std::size_t i = 0; i < d.obs.size(); ++i) {
        const auto& o = d.obs[i];
        CHECK(o.outcome == y[o.patch * T + o.time]);
        double sum = 0;
        for (int k = 0; k < kBinCount; ++k) sum += d.design[i * kBinCount + k];
        if (!ev[o.patch]) {
            CHECK(sum == 0.0);
            CHECK_FALSE(o.event_time.has_value());
            continue;
        }
        const int et = static_cast<int>(o.time) - static_cast<int>(*ev[o.patch]);
        CHECK(*o.event_time == et);
        if (et <= -6) {
            CHECK(sum == 0.0);
        } else {
            CHECK(sum == 1.0);
            CHECK(d.design[i * kBinCount + bin_column(std::min(et, 5))] == 1.0);
        }
    }
    CHECK_THROWS_AS(build_design(P, T, std::vector<double>(5), ev), DimensionError);
}

TEST_CASE("within_transform absorbs both fixed effects") {
    const std::size_t P = 40, T = 12;
    Rng rng(51);
    std::vector<double> y(P * T), a(P), b(T);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t t = 0; t < T; ++t) y[p * T + t] = a[p] + b[t] + 0.1 * rng.normal();
    std::vector<std::optional<std::size_t>> ev(P);
    for (std::size_t p = 0; p < 15; ++p) ev[p] = 2 + rng.below(8);
    const auto d = build_design(P, T, y, ev);
    const auto w = within_transform(d);
    auto means_ok = [&](const std::vector<double>& v, std::size_t stride, std::size_t col) {
        double worst = 0;
        for (std::size_t p = 0; p < P; ++p) {
            double s = 0;
            for (std::size_t t = 0; t < T; ++t) s += v[(p * T + t) * stride + col];
            worst = std::max(worst, std::abs(s / T));
        }
        for (std::size_t t = 0; t < T; ++t) {
            double s = 0;
            for (std::size_t p = 0; p < P; ++p) s += v[(p * T + t) * stride + col];
            worst = std::max(worst, std::abs(s / P));
        }
        return worst;
    };
    CHECK(means_ok(w.y, 1, 0) <= 1e-8);
    for (int k = 0; k < kBinCount; ++k) CHECK(means_ok(w.x, kBinCount, k) <= 1e-8);

    // Pure fixed effects leave nothing to explain.
    std::vector<double> fe(P * T);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t t = 0; t < T; ++t) fe[p * T + t] = a[p] + b[t];
    const auto r = estimate(build_design(P, T, fe, ev));
    for (double c : r.coefficients) CHECK(std::abs(c) <= 1e-8);
    CHECK(r.converged);
    CHECK(r.n_obs == P * T);
    CHECK(r.at(kReferenceBin) == 0.0);

    CHECK_THROWS_AS(within_transform(build_design(1, T, std::vector<double>(T), std::vector<std::optional<std::size_t>>(1))),
                    InputError);
    CHECK_THROWS_AS(within_transform(build_design(P, 1, std::vector<double>(P), ev)), InputError);
}

TEST_CASE("estimate recovers a step effect") {
    const auto p = oracles::simulate_event_panel(300, 16, 60, 0.2, 0.01, 52);
    const auto r = fit(p);
    for (int b = -5; b <= -1; ++b) CHECK(std::abs(r.at(b)) <= 0.01);
    for (int b = 0; b <= 5; ++b) CHECK(std::abs(r.at(b) - 0.2) <= 0.02);

    const auto zero = estimate(build_design(p.patches, p.dates, std::vector<double>(p.outcome.size()), p.event_index));
    for (double c : zero.coefficients) CHECK(std::abs(c) <= 1e-12);
}

TEST_CASE("estimate does not depend on patch order") {
    const auto p = oracles::simulate_event_panel(120, 14, 30, 0.1, 0.05, 53);
    std::vector<std::size_t> perm(p.patches);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(54);
    rng.shuffle(std::span<std::size_t>(perm));
    auto q = p;
    for (std::size_t i = 0; i < p.patches; ++i) {
        q.event_index[i] = p.event_index[perm[i]];
        for (std::size_t t = 0; t < p.dates; ++t) q.outcome[i * p.dates + t] = p.outcome[perm[i] * p.dates + t];
    }
    const auto a = fit(p), b = fit(q);
    for (int k = 0; k < kBinCount; ++k) CHECK(a.coefficients[k] == doctest::Approx(b.coefficients[k]).epsilon(1e-9));
}

TEST_CASE("estimate is unbiased under the null") {
    const int reps = 40;
    std::array<double, kBinCount> sum{}, sq{};
    for (int r = 0; r < reps; ++r) {
        const auto c = fit(oracles::simulate_event_panel(150, 14, 40, 0.0, 0.05, 600 + r)).coefficients;
        for (int k = 0; k < kBinCount; ++k) {
            sum[k] += c[k];
            sq[k] += c[k] * c[k];
        }
    }
    for (int k = 0; k < kBinCount; ++k) {
        const double mean = sum[k] / reps;
        const double sd = std::sqrt(std::max(0.0, sq[k] / reps - mean * mean));
        CHECK(std::abs(mean) <= 4 * sd / std::sqrt(static_cast<double>(reps)));
    }
}

TEST_CASE("simultaneous events without controls are collinear") {
    const std::size_t P = 10, T = 20;
    Rng rng(55);
    std::vector<double> y(P * T);
    for (auto& v : y) v = rng.uniform();
    const std::vector<std::optional<std::size_t>> ev(P, 8);
    CHECK_THROWS_AS(estimate(build_design(P, T, y, ev)), CollinearityError);
}

TEST_CASE("event study files") {
    const auto dir = test_support::scratch_dir("event_io");
    const std::vector<EventRecord> ev{{{36.2, 37.1}, Date(2016, 8, 2), "airstrike"}, {{36.25, 37.0}, Date(2016, 9, 1), "shelling"}};
    write_events(ev, dir / "e.csv");
    const auto back = read_events(dir / "e.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].lonlat.lat == 37.0);
    CHECK(back[1].date == Date(2016, 9, 1));
    CHECK(back[0].event_type == "airstrike");

    RegressionResult r;
    r.coefficients[bin_column(2)] = 0.25;
    write_coefficients_csv(r, dir / "c.csv");
    std::ifstream in(dir / "c.csv");
    std::string header, first, line;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "bin,coefficient");
    CHECK(first.rfind("-6,0", 0) == 0);
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == kBinCount + 1);
}
