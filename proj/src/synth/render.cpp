#include "destrack/synth/render.hpp"

#include <algorithm>
#include <cmath>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"

namespace destrack::synth {

namespace {

// Hash-derived value in [-1, 1).
double signed_unit(std::uint64_t h) { return unit_from_bits(h) * 2.0 - 1.0; }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Bare ground: coarse 8 px mottling plus fine grain.
std::array<double, 3> ground(std::uint64_t seed, int x, int y) {
    const double coarse = 12.0 * signed_unit(derive_seed(seed, 1, x / 8, y / 8));
    const double fine = 4.0 * signed_unit(derive_seed(seed, 2, x, y));
    return {185 + coarse + fine, 170 + coarse + fine, 140 + coarse + fine};
}

// Approximately standard normal from one hash: sum of four 16-bit uniforms.
double gauss(std::uint64_t h) {
    double s = 0;
    for (int k = 0; k < 4; ++k) s += static_cast<double>((h >> (16 * k)) & 0xffff) / 65536.0;
    return (s - 2.0) * 1.7320508075688772;
}

}  // namespace

Renderer::Renderer(const CityModel& city, RenderSpec spec) : city_(city), spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.date_count != city.date_count)
        throw ConfigError("render date_count " + std::to_string(spec_.date_count) + " differs from the city's " +
                          std::to_string(city.date_count));
    dates_ = image_dates(spec_);
    const int W = city.width, H = city.height;
    const std::uint64_t seed = derive_seed(city.seed, 0x5ce7e);
    base_.resize(static_cast<std::size_t>(W) * H * 3);
    auto put = [&](int x, int y, double r, double g, double b) {
        std::uint8_t* p = base_.data() + (static_cast<std::size_t>(y) * W + x) * 3;
        p[0] = to_byte(r);
        p[1] = to_byte(g);
        p[2] = to_byte(b);
    };
    auto clip = [&](const Rect& r) {
        return Rect{std::max(r.x, 0), std::max(r.y, 0), std::min(r.x + r.w, W) - std::max(r.x, 0),
                    std::min(r.y + r.h, H) - std::max(r.y, 0)};
    };

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const auto c = ground(seed, x, y);
            put(x, y, c[0], c[1], c[2]);
        }
    for (const auto& park : city.parks) {
        const Rect r = clip(park);
        for (int y = r.y; y < r.y + r.h; ++y)
            for (int x = r.x; x < r.x + r.w; ++x) {
                const double t = 15.0 * signed_unit(derive_seed(seed, 3, x / 4, y / 4)) +
                                 4.0 * signed_unit(derive_seed(seed, 4, x, y));
                put(x, y, 85 + t, 125 + t, 65 + t);
            }
    }
    for (const auto& street : city.streets) {
        const Rect r = clip(street);
        for (int y = r.y; y < r.y + r.h; ++y)
            for (int x = r.x; x < r.x + r.w; ++x) {
                const double t = 3.0 * signed_unit(derive_seed(seed, 5, x, y));
                put(x, y, 95 + t, 95 + t, 100 + t);
            }
    }
    for (const auto& b : city.buildings) {
        const Rect& f = b.footprint;
        // Shadow cast to the lower right.
        const Rect sh = clip({f.x + 3, f.y + 3, f.w, f.h});
        for (int y = sh.y; y < sh.y + sh.h; ++y)
            for (int x = sh.x; x < sh.x + sh.w; ++x) {
                std::uint8_t* p = base_.data() + (static_cast<std::size_t>(y) * W + x) * 3;
                for (int c = 0; c < 3; ++c) p[c] = to_byte(p[c] * 0.55);
            }
        const Rect r = clip(f);
        const bool long_x = f.w >= f.h;
        for (int y = r.y; y < r.y + r.h; ++y)
            for (int x = r.x; x < r.x + r.w; ++x) {
                double shade;
                if (b.roof_style == 0) {
                    const bool first_half = long_x ? (y - f.y) * 2 < f.h : (x - f.x) * 2 < f.w;
                    shade = first_half ? 18.0 : -18.0;
                } else {
                    const int edge = std::min({x - f.x, y - f.y, f.x + f.w - 1 - x, f.y + f.h - 1 - y});
                    shade = edge < 2 ? -25.0 : 0.0;
                }
                shade += 3.0 * signed_unit(derive_seed(seed, 6, x, y));
                put(x, y, b.color[0] + shade, b.color[1] + shade, b.color[2] + shade);
            }
    }
}

raster::GeoRaster Renderer::render(int date_index) const {
    if (date_index < 0 || date_index >= spec_.date_count)
        throw ConfigError("date index " + std::to_string(date_index) + " outside [0, " +
                          std::to_string(spec_.date_count) + ")");
    const int W = city_.width, H = city_.height;
    std::vector<std::uint8_t> img = base_;
    const std::uint64_t scene_seed = derive_seed(city_.seed, 0x5ce7e);

    // Rubble replaces the roof, its shadow and a little spill around it.
    const auto& rb = spec_.rubble;
    for (const auto& [id, when] : city_.destruction_schedule) {
        if (when > date_index) continue;
        const Building& b = city_.buildings[id];
        const Rect& f = b.footprint;
        const int x0 = std::max(0, f.x - 2), y0 = std::max(0, f.y - 2);
        const int x1 = std::min(W, f.x + f.w + 3), y1 = std::min(H, f.y + f.h + 3);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                std::uint8_t* p = img.data() + (static_cast<std::size_t>(y) * W + x) * 3;
                const bool core = f.contains(x, y);
                const int fx = (x - f.x + 2) / rb.fragment_px, fy = (y - f.y + 2) / rb.fragment_px;
                const std::uint64_t h = derive_seed(city_.seed, 0x4b1e, id, fx, fy);
                // Spill covers about half of the ring around the footprint.
                if (!core && (h & 1)) {
                    const auto g = ground(scene_seed, x, y);
                    for (int c = 0; c < 3; ++c) p[c] = to_byte(g[c]);
                    continue;
                }
                const double gray = rb.gray_lo + (rb.gray_hi - rb.gray_lo) * unit_from_bits(mix64(h));
                for (int c = 0; c < 3; ++c) {
                    const double tint = 0.75 * gray + 0.25 * b.color[c];
                    p[c] = to_byte(tint * rb.darkening);
                }
            }
    }

    const std::uint64_t date_seed = derive_seed(city_.seed, 0x111u, date_index);

    // Transient clutter: same fragment texture as rubble, present on this date only.
    const double expected = spec_.clutter_density * W * static_cast<double>(H) / 1e6;
    const auto blobs = static_cast<long>(std::floor(expected + unit_from_bits(derive_seed(date_seed, 5))));
    for (long k = 0; k < blobs; ++k) {
        const std::uint64_t h = derive_seed(date_seed, 6, k);
        const int bw = 8 + static_cast<int>(mix64(h ^ 1) % 11), bh = 8 + static_cast<int>(mix64(h ^ 2) % 11);
        const int bx = static_cast<int>(mix64(h ^ 3) % static_cast<std::uint64_t>(W));
        const int by = static_cast<int>(mix64(h ^ 4) % static_cast<std::uint64_t>(H));
        for (int y = by; y < std::min(H, by + bh); ++y)
            for (int x = bx; x < std::min(W, bx + bw); ++x) {
                const std::uint64_t f = derive_seed(h, (x - bx) / rb.fragment_px, (y - by) / rb.fragment_px);
                if ((f & 3) == 0) continue;
                const double gray = rb.gray_lo + (rb.gray_hi - rb.gray_lo) * unit_from_bits(mix64(f));
                std::uint8_t* p = img.data() + (static_cast<std::size_t>(y) * W + x) * 3;
                for (int c = 0; c < 3; ++c) p[c] = to_byte((0.75 * gray + 0.25 * p[c]) * rb.darkening);
            }
    }

    // Per-date illumination and color cast, then pixel noise.
    const double a = spec_.illumination_shift;
    const double gain = 1.0 + a * signed_unit(derive_seed(date_seed, 1));
    const double offset = 40.0 * a * signed_unit(derive_seed(date_seed, 2));
    std::array<double, 3> cast{};
    for (int c = 0; c < 3; ++c) cast[c] = 1.0 + 0.5 * a * signed_unit(derive_seed(date_seed, 3, c));
    const double sigma = spec_.noise_sigma;
    const std::uint64_t noise_seed = derive_seed(date_seed, 4);
    const std::size_t n = img.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = img[i] * gain * cast[i % 3] + offset;
        if (sigma > 0) v += sigma * gauss(mix64(noise_seed + i));
        img[i] = to_byte(v);
    }
    return raster::GeoRaster(W, H, 3, std::move(img), city_.geo, dates_[date_index], city_.city_id);
}

raster::GeoRaster render(const CityModel& city, const RenderSpec& spec, int date_index) {
    return Renderer(city, spec).render(date_index);
}

}  // namespace destrack::synth
