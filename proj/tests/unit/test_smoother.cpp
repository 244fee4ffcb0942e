#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"
#include "destrack/evaluation/metrics.hpp"
#include "destrack/smoother/features.hpp"
#include "destrack/smoother/forest.hpp"
#include "destrack/smoother/score_panel.hpp"
#include "destrack/smoother/smooth.hpp"
#include "support.hpp"

using namespace destrack;
using namespace destrack::smoother;
using raster::PatchId;

namespace {

raster::PatchGrid grid_with_holes(int rows, int cols, const std::vector<PatchId>& holes = {}) {
    std::vector<PatchId> inc;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (std::find(holes.begin(), holes.end(), PatchId{r, c}) == holes.end()) inc.push_back({r, c});
    return raster::PatchGrid("c", 64, rows, cols, inc, {});
}

std::vector<Date> dates(int n) {
    std::vector<Date> d;
    for (int i = 0; i < n; ++i) d.push_back(Date(2014, 1, 1).plus_days(30 * i));
    return d;
}

ScorePanel panel_for(const raster::PatchGrid& g, int n_dates) {
    return ScorePanel("c", std::vector<PatchId>(g.included().begin(), g.included().end()), dates(n_dates));
}

// Brute-force ring statistics straight from grid coordinates.
std::vector<double> brute_features(const ScorePanel& p, const raster::PatchGrid& g, std::size_t idx, std::size_t t) {
    std::vector<double> out;
    for (int tau : {0, -1, -2}) {
        const long tt = static_cast<long>(t) + tau;
        const std::size_t use = tt < 0 ? t : static_cast<std::size_t>(tt);
        out.push_back(p.stage1(idx, use));
        for (int radius : {1, 2}) {
            std::vector<double> v;
            for (std::size_t j = 0; j < g.size(); ++j) {
                const int d = std::max(std::abs(g.patch(j).row - g.patch(idx).row),
                                       std::abs(g.patch(j).col - g.patch(idx).col));
                if (d == radius) v.push_back(p.stage1(j, use));
            }
            if (v.empty()) {
                out.push_back(p.stage1(idx, use));
                out.push_back(0.0);
                continue;
            }
            double m = 0;
            for (double x : v) m += x;
            m /= v.size();
            double ss = 0;
            for (double x : v) ss += (x - m) * (x - m);
            out.push_back(m);
            out.push_back(std::sqrt(ss / v.size()));
        }
    }
    return out;
}

FeatureMatrix matrix(std::size_t rows, std::size_t cols, const std::vector<double>& v) { return {rows, cols, v}; }

}  // namespace

TEST_CASE("feature examples") {
    const auto g = grid_with_holes(6, 6);
    auto p = panel_for(g, 3);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < 3; ++t) p.set_stage1(i, t, 0.4);
    const auto f = build_features(p, g, {2, 2}, p.dates()[2]);
    REQUIRE(f.values.size() == 15);
    for (int k = 0; k < 15; ++k) CHECK(f.values[k] == doctest::Approx(k % 5 == 2 || k % 5 == 4 ? 0.0 : 0.4));
    CHECK(f.mask == 0);
    CHECK(build_features(p, g, {2, 2}, p.dates()[0]).mask == 3);
    CHECK(build_features(p, g, {2, 2}, p.dates()[1]).mask == 2);
    CHECK_THROWS_AS(build_features(p, g, {2, 2}, Date(2000, 1, 1)), LookupError);
    CHECK_THROWS_AS(build_features(p, g, {9, 9}, p.dates()[0]), LookupError);

    for (std::size_t i = 0; i < g.size(); ++i) p.set_stage1(i, 2, 0.0);
    p.set_stage1(*g.index_of({2, 2}), 2, 1.0);
    CHECK(build_features(p, g, {2, 3}, p.dates()[2]).values[1] == doctest::Approx(1.0 / 8));

    const auto nb = neighborhoods(g);
    CHECK(nb[*g.index_of({0, 0})].ring1.size() == 3);
    CHECK(nb[*g.index_of({0, 0})].ring2.size() == 5);
    for (std::size_t a = 0; a < g.size(); ++a)
        for (auto b : nb[a].ring1) {
            const auto& back = nb[b].ring1;
            CHECK(std::find(back.begin(), back.end(), a) != back.end());
        }

    FeatureOptions leads;
    leads.include_leads = true;
    const auto fl = build_features(p, g, {2, 2}, p.dates()[2], leads);
    CHECK(fl.values.size() == 25);
    CHECK(fl.mask == (4 | 8));
}

TEST_CASE("features match brute-force neighbour enumeration") {
    const auto g = grid_with_holes(7, 9, {{3, 4}, {0, 0}, {6, 8}, {2, 2}});
    Rng rng(41);
    auto p = panel_for(g, 4);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < 4; ++t) p.set_stage1(i, t, rng.uniform());
    const auto x = build_feature_matrix(p, g, {}, 3);
    CHECK(x.rows == g.size() * 4);
    CHECK(x.cols == 15);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < 4; ++t) {
            const auto want = brute_features(p, g, i, t);
            const auto got = x.row(i * 4 + t);
            for (int k = 0; k < 15; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
        }
    // An isolated patch has empty rings.
    const raster::PatchGrid lone("c", 64, 5, 5, {{0, 0}, {4, 4}}, {});
    auto q = panel_for(lone, 1);
    q.set_stage1(0, 0, 0.3);
    q.set_stage1(1, 0, 0.9);
    const auto f = build_features(q, lone, {0, 0}, q.dates()[0]);
    CHECK(f.values[1] == 0.3);
    CHECK(f.values[2] == 0.0);
}

TEST_CASE("forest basics") {
    // One feature that equals the label.
    std::vector<double> v;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 40; ++i) {
        y.push_back(i % 2);
        v.push_back(i % 2 ? 0.9 : 0.1);
    }
    ForestParams fp;
    fp.num_trees = 1;
    fp.max_depth = 1;
    fp.min_leaf = 1;
    fp.features_per_split = 1;
    const auto fit = train_forest(matrix(40, 1, v), y, fp);
    CHECK(fit.model.trees[0].depth() <= 1);
    evaluation::ScoredLabelSet s;
    for (int i = 0; i < 40; ++i) s.add(fit.model.predict(std::span<const double>(&v[i], 1)), y[i]);
    CHECK(evaluation::roc_auc(s) == 1.0);

    CHECK_THROWS_AS(train_forest(matrix(2, 1, {0.1, 0.2}), std::vector<std::uint8_t>{1, 1}, fp), ClassError);
    CHECK_THROWS_AS(train_forest(matrix(2, 1, {0.1, 0.2}), std::vector<std::uint8_t>{1, 0, 1}, fp), DimensionError);
}

TEST_CASE("forest prediction is the mean of tree leaves") {
    RandomForestModel m;
    m.num_features = 1;
    DecisionTree a, b;
    a.nodes = {{0, 0.5, 1, 2, 0.0}, {-1, 0, -1, -1, 0.2}, {-1, 0, -1, -1, 1.0}};
    b.nodes = {{-1, 0, -1, -1, 0.6}};
    m.trees = {a, b};
    const double x0 = 0.3, x1 = 0.7;
    CHECK(m.predict(std::span<const double>(&x0, 1)) == doctest::Approx(0.4));
    CHECK(m.predict(std::span<const double>(&x1, 1)) == doctest::Approx(0.8));
    m.trees = {a};
    CHECK(m.predict(std::span<const double>(&x0, 1)) == 0.2);
}

TEST_CASE("forest on noise, determinism and tree increments") {
    Rng rng(42);
    const std::size_t n = 2000;
    std::vector<double> v(n * 4);
    std::vector<std::uint8_t> y(n);
    for (auto& x : v) x = rng.uniform();
    for (auto& l : y) l = rng.bernoulli(0.5);
    ForestParams fp;
    fp.num_trees = 60;
    fp.features_per_split = 2;
    fp.seed = 8;
    const auto x = matrix(n, 4, v);
    const auto fit = train_forest(x, y, fp);
    evaluation::ScoredLabelSet oob;
    for (std::size_t i = 0; i < n; ++i) oob.add(fit.oob_scores[i], y[i]);
    CHECK(std::abs(evaluation::roc_auc(oob) - 0.5) <= 0.05);

    for (const auto& t : fit.model.trees) {
        CHECK(t.depth() <= fp.max_depth);
        for (const auto& node : t.nodes)
            if (node.feature < 0) {
                CHECK(node.value >= 0.0);
                CHECK(node.value <= 1.0);
            }
    }
    auto threaded = fp;
    threaded.jobs = 3;
    CHECK(train_forest(x, y, threaded).model.trees == fit.model.trees);
    CHECK(train_forest(x, y, fp).oob_scores == fit.oob_scores);

    // Growing the ensemble one tree at a time moves a score by at most 1/(k+1).
    RandomForestModel partial = fit.model;
    for (std::size_t k = 1; k < fit.model.trees.size(); ++k) {
        partial.trees.assign(fit.model.trees.begin(), fit.model.trees.begin() + k);
        RandomForestModel more = partial;
        more.trees.push_back(fit.model.trees[k]);
        for (std::size_t i = 0; i < 20; ++i) {
            const double s0 = partial.predict(x.row(i)), s1 = more.predict(x.row(i));
            CHECK(std::abs(s1 - s0) <= 1.0 / (k + 1) + 1e-12);
        }
    }
}

TEST_CASE("forest file round trip") {
    const auto dir = test_support::scratch_dir("forest_io");
    Rng rng(43);
    std::vector<double> v(300 * 3);
    std::vector<std::uint8_t> y(300);
    for (std::size_t i = 0; i < 300; ++i) {
        for (int k = 0; k < 3; ++k) v[i * 3 + k] = rng.uniform();
        y[i] = v[i * 3] + 0.2 * rng.uniform() > 0.6;
    }
    ForestParams fp;
    fp.num_trees = 7;
    const auto fit = train_forest(matrix(300, 3, v), y, fp);
    save_forest(fit.model, dir / "f.json");
    const auto back = load_forest(dir / "f.json");
    CHECK(back.trees == fit.model.trees);
    CHECK(back.num_features == 3);
    CHECK(back.params.num_trees == 7);
}

TEST_CASE("calibrate_cutoff") {
    const std::vector<std::uint8_t> pos4{1, 1, 1, 1, 0};
    auto c = calibrate_cutoff(std::vector<double>{0.9, 0.7, 0.3, 0.1, 0.8}, pos4, 0.5);
    CHECK(c.threshold == 0.7);
    CHECK(c.achieved_train_recall == 0.5);
    c = calibrate_cutoff(std::vector<double>{1.0, 1.0, 1.0, 1.0, 0.2}, pos4);
    CHECK(c.threshold == 1.0);
    CHECK(c.achieved_train_recall == 1.0);
    CHECK_THROWS_AS(calibrate_cutoff(std::vector<double>{0.5}, std::vector<std::uint8_t>{0}), ClassError);
    CHECK_THROWS_AS(calibrate_cutoff(std::vector<double>{0.5}, std::vector<std::uint8_t>{1}, 0.0), ConfigError);

    Rng rng(44);
    std::vector<double> s(1001);
    std::vector<std::uint8_t> l(1001, 1);
    for (auto& x : s) x = rng.uniform();
    c = calibrate_cutoff(s, l);
    CHECK(c.achieved_train_recall >= 0.5);
    CHECK(c.achieved_train_recall <= 0.5 + 1.0 / 1001 + 1e-12);

    // Tiered scores: recall lands on a tier edge and dropping that tier falls short.
    std::vector<double> tiers;
    std::vector<std::uint8_t> lab;
    for (int i = 0; i < 200; ++i) {
        tiers.push_back(static_cast<double>(rng.below(9)) / 8);
        lab.push_back(rng.bernoulli(0.4));
    }
    c = calibrate_cutoff(tiers, lab, 0.5);
    std::size_t p = 0, above = 0, strictly = 0;
    for (std::size_t i = 0; i < tiers.size(); ++i) {
        if (!lab[i]) continue;
        ++p;
        above += tiers[i] >= c.threshold;
        strictly += tiers[i] > c.threshold;
    }
    CHECK(c.achieved_train_recall == doctest::Approx(static_cast<double>(above) / p));
    CHECK(c.achieved_train_recall >= 0.5);
    CHECK(static_cast<double>(strictly) / p < 0.5);
}

TEST_CASE("smooth_panel fills stage 2 and binarizes monotonically") {
    const auto g = grid_with_holes(4, 4);
    auto p = panel_for(g, 3);
    Rng rng(45);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < 3; ++t) p.set_stage1(i, t, rng.uniform());
    RandomForestModel constant;
    constant.num_features = 15;
    DecisionTree leaf;
    leaf.nodes = {{-1, 0, -1, -1, 0.3}};
    constant.trees = {leaf};
    auto q = p;
    smooth_panel(q, g, constant, {0.3, 0.5});
    CHECK(q.has_stage2());
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(*q.stage2(i, t) == 0.3);
            CHECK(*q.binary(i, t) == 1);
            CHECK(q.stage1(i, t) == p.stage1(i, t));
        }

    std::vector<std::uint8_t> y;
    const auto x = build_feature_matrix(p, g);
    for (std::size_t r = 0; r < x.rows; ++r) y.push_back(x.row(r)[0] > 0.5);
    ForestParams fp;
    fp.num_trees = 10;
    fp.min_leaf = 2;
    const auto fit = train_forest(x, y, fp);
    auto lo = p, hi = p;
    smooth_panel(lo, g, fit.model, {0.3, 0.5});
    smooth_panel(hi, g, fit.model, {0.6, 0.5}, {}, 2);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(*lo.stage2(i, t) == *hi.stage2(i, t));
            CHECK(*hi.binary(i, t) <= *lo.binary(i, t));
            CHECK(*lo.stage2(i, t) >= 0.0);
            CHECK(*lo.stage2(i, t) <= 1.0);
        }

    const auto dir = test_support::scratch_dir("smooth_io");
    write_smoothed_csv(lo, dir / "s.csv");
    CHECK(read_panel_csv(dir / "s.csv", g) == lo);
    write_stage1_csv(p, dir / "p.csv");
    CHECK(read_panel_csv(dir / "p.csv", g) == p);
}
