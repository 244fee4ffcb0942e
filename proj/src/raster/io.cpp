#include "destrack/raster/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"

namespace destrack::raster {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path sidecar_path_for(const fs::path& png_path) {
    fs::path p = png_path;
    p.replace_extension(".json");
    return p;
}

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

template <class T>
T field(const json& j, const char* key, const fs::path& path) {
    if (!j.contains(key)) throw FormatError(path.string() + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": field '" + key + "': " + e.what());
    }
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

RasterHeader read_header(const fs::path& png_path) {
    const auto side = sidecar_path_for(png_path);
    const json j = read_json(side);
    RasterHeader h;
    h.png_path = png_path;
    h.sidecar_path = side;
    h.geo.origin_lon = field<double>(j, "origin_lon", side);
    h.geo.origin_lat = field<double>(j, "origin_lat", side);
    h.geo.pixel_deg = field<double>(j, "pixel_deg", side);
    h.capture_date = Date::parse(field<std::string>(j, "capture_date", side));
    h.city_id = field<std::string>(j, "city_id", side);
    if (!(h.geo.pixel_deg > 0)) throw FormatError(side.string() + ": pixel_deg must be > 0");
    return h;
}

GeoRaster read_raster(const fs::path& png_path) {
    const RasterHeader h = read_header(png_path);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, png_path.string().c_str()))
        throw InputError(png_path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw FormatError(png_path.string() + ": " + image.message);
    }
    return GeoRaster(static_cast<int>(image.width), static_cast<int>(image.height), 3, std::move(pixels), h.geo,
                     h.capture_date, h.city_id);
}

void write_raster(const GeoRaster& raster, const fs::path& png_path, int compression_level) {
    if (raster.channels() != 3) throw DimensionError("only RGB rasters can be written as PNG");
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(png_path.string().c_str(), "wb"));
    if (!fp) throw InputError("cannot write " + png_path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw InputError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InputError("libpng failed writing " + png_path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, std::clamp(compression_level, 0, 9));
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width()), static_cast<png_uint_32>(raster.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto px = raster.pixels();
    const std::size_t stride = static_cast<std::size_t>(raster.width()) * 3;
    for (int r = 0; r < raster.height(); ++r)
        png_write_row(png, const_cast<png_bytep>(px.data() + r * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    json side = {{"origin_lon", raster.geo().origin_lon},
                 {"origin_lat", raster.geo().origin_lat},
                 {"pixel_deg", raster.geo().pixel_deg},
                 {"capture_date", raster.capture_date().iso()},
                 {"city_id", raster.city_id()}};
    write_json(side, sidecar_path_for(png_path));
}

std::vector<RasterHeader> list_raster_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("raster directory not found: " + dir.string());
    std::vector<RasterHeader> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".png") continue;
        if (!fs::exists(sidecar_path_for(entry.path()))) continue;
        out.push_back(read_header(entry.path()));
    }
    if (out.empty()) throw InputError("no rasters in " + dir.string());
    std::sort(out.begin(), out.end(), [](const RasterHeader& a, const RasterHeader& b) {
        return a.capture_date < b.capture_date;
    });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].capture_date == out[i - 1].capture_date)
            throw FormatError(dir.string() + ": two rasters share capture date " + out[i].capture_date.iso());
    return out;
}

namespace {

AreaOfInterest aoi_from_json(const json& j, const fs::path& path) {
    const auto kind_s = field<std::string>(j, "kind", path);
    AoiKind kind;
    if (kind_s == "populated_area")
        kind = AoiKind::PopulatedArea;
    else if (kind_s == "no_analysis_zone")
        kind = AoiKind::NoAnalysisZone;
    else
        throw FormatError(path.string() + ": unknown AOI kind '" + kind_s + "'");
    std::vector<Ring> rings;
    try {
        for (const auto& r : j.at("rings")) {
            Ring ring;
            for (const auto& v : r) ring.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            rings.push_back(std::move(ring));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": rings: " + e.what());
    }
    try {
        return AreaOfInterest(kind, std::move(rings));
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

json aoi_to_json(const AreaOfInterest& aoi) {
    json rings = json::array();
    for (const auto& r : aoi.rings()) {
        json ring = json::array();
        for (const auto& v : r) ring.push_back({v.lon, v.lat});
        rings.push_back(ring);
    }
    return {{"kind", aoi.kind() == AoiKind::PopulatedArea ? "populated_area" : "no_analysis_zone"}, {"rings", rings}};
}

}  // namespace

AreaOfInterest read_aoi(const fs::path& path) {
    const json j = read_json(path);
    if (j.is_array()) throw FormatError(path.string() + ": expected a single area, found a list");
    return aoi_from_json(j, path);
}

void write_aoi(const AreaOfInterest& aoi, const fs::path& path) { write_json(aoi_to_json(aoi), path); }

std::vector<AreaOfInterest> read_aois(const fs::path& path) {
    const json j = read_json(path);
    std::vector<AreaOfInterest> out;
    if (!j.is_array()) {
        out.push_back(aoi_from_json(j, path));
        return out;
    }
    for (const auto& a : j) out.push_back(aoi_from_json(a, path));
    return out;
}

void write_aois(std::span<const AreaOfInterest> aois, const fs::path& path) {
    json j = json::array();
    for (const auto& a : aois) j.push_back(aoi_to_json(a));
    write_json(j, path);
}

void write_grid_csv(const PatchGrid& grid, const fs::path& path) {
    csv::Writer w(path, {"city_id", "row", "col", "included", "no_analysis"});
    for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
            const bool inc = grid.contains({r, c});
            w.field(grid.city_id()).field(r).field(c).field(inc ? 1 : 0).field(grid.is_no_analysis({r, c}) ? 1 : 0);
            w.end_row();
        }
    }
    w.close();
}

PatchGrid read_grid_csv(const fs::path& path, int patch_size) {
    const auto t = csv::Table::read(path);
    t.require_header({"city_id", "row", "col", "included", "no_analysis"});
    std::string city;
    int rows = 0, cols = 0;
    std::vector<PatchId> included, no_analysis;
    for (const auto& row : t.rows()) {
        city = row[0];
        const int r = static_cast<int>(csv::parse_int(row[1]));
        const int c = static_cast<int>(csv::parse_int(row[2]));
        rows = std::max(rows, r + 1);
        cols = std::max(cols, c + 1);
        if (csv::parse_int(row[3])) included.push_back({r, c});
        if (csv::parse_int(row[4])) no_analysis.push_back({r, c});
    }
    return PatchGrid(city, patch_size, rows, cols, std::move(included), std::move(no_analysis));
}

}  // namespace destrack::raster
