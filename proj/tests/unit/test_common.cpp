#include <doctest.h>

#include <cmath>
#include <limits>

#include "destrack/common/csv.hpp"
#include "destrack/common/date.hpp"
#include "destrack/common/error.hpp"
#include "destrack/common/parallel.hpp"
#include "destrack/common/random.hpp"
#include "support.hpp"

using namespace destrack;

TEST_CASE("dates") {
    const Date d = Date::parse("2013-09-23");
    CHECK(d.iso() == "2013-09-23");
    CHECK(d.plus_days(73).iso() == "2013-12-05");
    CHECK(Date(2016, 2, 29).plus_days(1) == Date(2016, 3, 1));
    CHECK_THROWS_AS(Date::parse("2013-02-30"), FormatError);
    CHECK_THROWS_AS(Date::parse("20130923"), FormatError);
    CHECK(Date(2014, 1, 1) < Date(2014, 1, 2));
}

TEST_CASE("doubles round trip through text") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(20)) - 10);
        CHECK(csv::parse_double(csv::format_double(v)) == v);
    }
    CHECK(csv::format_double(0.5) == "0.5");
    CHECK_THROWS_AS(csv::parse_double("1.5x"), FormatError);
    CHECK_THROWS_AS(csv::parse_int("7.0"), FormatError);
}

TEST_CASE("csv writer and table") {
    const auto dir = test_support::scratch_dir("csv");
    {
        csv::Writer w(dir / "t.csv", {"a", "b"});
        w.field(1).field("x");
        w.end_row();
        w.field(2.5).field(std::size_t{3});
        w.end_row();
        w.close();
    }
    const auto t = csv::Table::read(dir / "t.csv");
    t.require_header({"a", "b"});
    CHECK(t.size() == 2);
    CHECK(t.rows()[1][0] == "2.5");
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.require_header({"b", "a"}), FormatError);
    CHECK_THROWS_AS(csv::Table::read(dir / "missing.csv"), InputError);
}

TEST_CASE("seed derivation and rng are reproducible") {
    CHECK(derive_seed(5, 1, 2) == derive_seed(5, 1, 2));
    CHECK(derive_seed(5, 1, 2) != derive_seed(5, 2, 1));
    Rng a(3), b(3);
    for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
    Rng r(4);
    for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw InputError("boom");
                    }),
                    InputError);
}
