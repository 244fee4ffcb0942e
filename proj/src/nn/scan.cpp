#include "destrack/nn/scan.hpp"

#include "destrack/common/error.hpp"
#include "destrack/common/parallel.hpp"
#include "destrack/nn/forward_backward.hpp"

namespace destrack::nn {

smoother::ScorePanel dense_scan(const NetworkSpec& spec, const NetworkParams& params, const raster::PatchGrid& grid,
                                const raster::GeoRaster& pre, std::span<const Date> post_dates,
                                const RasterProvider& provider, int jobs, int batch_size) {
    spec.validate();
    params.check_shapes(spec);
    if (grid.patch_size() != spec.input_size)
        throw ShapeError("grid patch size " + std::to_string(grid.patch_size()) + " differs from network input " +
                         std::to_string(spec.input_size));
    smoother::ScorePanel panel(grid.city_id(), {grid.included().begin(), grid.included().end()},
                               {post_dates.begin(), post_dates.end()});
    const std::size_t n = grid.size();
    const std::size_t batches = (n + batch_size - 1) / batch_size;
    for (std::size_t t = 0; t < post_dates.size(); ++t) {
        const auto post = provider(post_dates[t]);
        if (!post) throw InputError("no raster for " + post_dates[t].iso());
        if (!pre.co_registered_with(*post))
            throw DimensionError("raster " + post_dates[t].iso() + " is not co-registered with the pre image");
        parallel_for(batches, jobs, [&](std::size_t b) {
            const std::size_t lo = b * batch_size;
            const std::size_t hi = std::min(n, lo + batch_size);
            std::vector<raster::PatchSample> samples;
            samples.reserve(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) samples.push_back(raster::extract_sample(pre, *post, grid, grid.patch(i)));
            std::vector<const raster::PatchSample*> ptrs;
            for (const auto& s : samples) ptrs.push_back(&s);
            const auto r = forward(spec, params, ptrs);
            for (std::size_t i = lo; i < hi; ++i) panel.set_stage1(i, t, r.scores[i - lo]);
        });
    }
    return panel;
}

smoother::ScorePanel dense_scan(const NetworkSpec& spec, const NetworkParams& params, const raster::PatchGrid& grid,
                                const raster::GeoRaster& pre, std::span<const raster::GeoRaster> posts, int jobs) {
    std::vector<Date> dates;
    for (const auto& r : posts) dates.push_back(r.capture_date());
    return dense_scan(
        spec, params, grid, pre, dates,
        [&](const Date& d) -> std::optional<raster::GeoRaster> {
            for (const auto& r : posts)
                if (r.capture_date() == d) return r;
            return std::nullopt;
        },
        jobs);
}

}  // namespace destrack::nn
