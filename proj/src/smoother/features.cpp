#include "destrack/smoother/features.hpp"

#include <cmath>

#include "destrack/common/error.hpp"
#include "destrack/common/parallel.hpp"

namespace destrack::smoother {

namespace {

void check_alignment(const ScorePanel& panel, const raster::PatchGrid& grid) {
    if (panel.patch_count() != grid.size())
        throw DimensionError("score panel has " + std::to_string(panel.patch_count()) + " patches, grid has " +
                             std::to_string(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!(panel.patches()[i] == grid.patch(i))) throw DimensionError("score panel and grid order differ");
}

void ring_stats(const ScorePanel& panel, const std::vector<std::size_t>& ring, std::size_t t, double own,
                double* out) {
    if (ring.empty()) {
        out[0] = own;
        out[1] = 0.0;
        return;
    }
    double sum = 0;
    for (auto q : ring) sum += panel.stage1(q, t);
    const double mean = sum / static_cast<double>(ring.size());
    double ss = 0;
    for (auto q : ring) {
        const double d = panel.stage1(q, t) - mean;
        ss += d * d;
    }
    out[0] = mean;
    out[1] = std::sqrt(ss / static_cast<double>(ring.size()));
}

void fill_offset(const ScorePanel& panel, const Neighborhood& nb, std::size_t p, std::size_t t, double* out) {
    const double own = panel.stage1(p, t);
    out[0] = own;
    ring_stats(panel, nb.ring1, t, own, out + 1);
    ring_stats(panel, nb.ring2, t, own, out + 3);
}

std::uint8_t fill_row(const ScorePanel& panel, const Neighborhood& nb, std::size_t p, std::size_t t,
                      const FeatureOptions& options, double* out) {
    fill_offset(panel, nb, p, t, out);
    std::uint8_t mask = 0;
    const long long T = static_cast<long long>(panel.date_count());
    const int offsets[] = {-1, -2, 1, 2};
    const int n_offsets = options.include_leads ? 4 : 2;
    for (int k = 0; k < n_offsets; ++k) {
        double* block = out + (k + 1) * kFeaturesPerOffset;
        const long long s = static_cast<long long>(t) + offsets[k];
        if (s < 0 || s >= T) {
            std::copy(out, out + kFeaturesPerOffset, block);
            mask |= static_cast<std::uint8_t>(1u << k);
        } else {
            fill_offset(panel, nb, p, static_cast<std::size_t>(s), block);
        }
    }
    return mask;
}

}  // namespace

std::vector<Neighborhood> neighborhoods(const raster::PatchGrid& grid) {
    std::vector<Neighborhood> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto id = grid.patch(i);
        for (int dr = -2; dr <= 2; ++dr)
            for (int dc = -2; dc <= 2; ++dc) {
                const int d = std::max(std::abs(dr), std::abs(dc));
                if (d == 0) continue;
                const auto q = grid.index_of({id.row + dr, id.col + dc});
                if (!q) continue;
                (d == 1 ? out[i].ring1 : out[i].ring2).push_back(*q);
            }
    }
    return out;
}

LagFeatureVector build_features(const ScorePanel& panel, const raster::PatchGrid& grid, raster::PatchId id, Date date,
                                const FeatureOptions& options) {
    check_alignment(panel, grid);
    const auto p = grid.index_of(id);
    if (!p) throw LookupError("patch (" + std::to_string(id.row) + "," + std::to_string(id.col) + ") not in grid");
    const std::size_t t = panel.date_index(date);
    Neighborhood nb;
    for (int dr = -2; dr <= 2; ++dr)
        for (int dc = -2; dc <= 2; ++dc) {
            const int d = std::max(std::abs(dr), std::abs(dc));
            if (d == 0) continue;
            if (const auto q = grid.index_of({id.row + dr, id.col + dc})) (d == 1 ? nb.ring1 : nb.ring2).push_back(*q);
        }
    LagFeatureVector v;
    v.values.resize(options.feature_count());
    v.mask = fill_row(panel, nb, *p, t, options, v.values.data());
    return v;
}

FeatureMatrix build_feature_matrix(const ScorePanel& panel, const raster::PatchGrid& grid,
                                   const FeatureOptions& options, int jobs) {
    check_alignment(panel, grid);
    const auto nbs = neighborhoods(grid);
    FeatureMatrix m;
    m.cols = options.feature_count();
    m.rows = panel.patch_count() * panel.date_count();
    m.values.resize(m.rows * m.cols);
    const std::size_t T = panel.date_count();
    parallel_for(panel.patch_count(), jobs, [&](std::size_t p) {
        for (std::size_t t = 0; t < T; ++t) fill_row(panel, nbs[p], p, t, options, m.values.data() + (p * T + t) * m.cols);
    });
    return m;
}

}  // namespace destrack::smoother
