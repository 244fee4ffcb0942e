#include "destrack/labels/io.hpp"

#include <algorithm>
#include <map>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"

namespace destrack::labels {

namespace fs = std::filesystem;

std::vector<Annotation> read_annotations(const fs::path& path) {
    const auto t = csv::Table::read(path);
    t.require_header({"lon", "lat", "date", "damage_class"});
    std::vector<Annotation> out;
    out.reserve(t.size());
    for (const auto& r : t.rows())
        out.push_back({{csv::parse_double(r[0]), csv::parse_double(r[1])}, Date::parse(r[2]), parse_damage_class(r[3])});
    return out;
}

void write_annotations(std::span<const Annotation> annotations, const fs::path& path) {
    csv::Writer w(path, {"lon", "lat", "date", "damage_class"});
    for (const auto& a : annotations) {
        w.field(a.lonlat.lon).field(a.lonlat.lat).field(a.date.iso()).field(to_string(a.damage_class));
        w.end_row();
    }
    w.close();
}

void write_label_panel(const LabelPanel& panel, const raster::PatchGrid& grid, const fs::path& path) {
    if (panel.patch_count() != grid.size()) throw DimensionError("label panel does not match grid");
    csv::Writer w(path, {"city_id", "row", "col", "date", "label"});
    std::vector<std::string> dates;
    for (const auto& d : panel.image_dates()) dates.push_back(d.iso());
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto& id = grid.patch(p);
        for (std::size_t t = 0; t < dates.size(); ++t) {
            w.field(grid.city_id()).field(id.row).field(id.col).field(dates[t]).field(to_string(panel.at(p, t)));
            w.end_row();
        }
    }
    w.close();
}

LabelPanel read_label_panel(const fs::path& path, const raster::PatchGrid& grid, std::vector<Date> annotation_dates) {
    const auto t = csv::Table::read(path);
    t.require_header({"city_id", "row", "col", "date", "label"});
    std::vector<Date> dates;
    for (const auto& r : t.rows()) dates.push_back(Date::parse(r[3]));
    std::sort(dates.begin(), dates.end());
    dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
    std::map<Date, std::size_t> date_index;
    for (std::size_t i = 0; i < dates.size(); ++i) date_index[dates[i]] = i;
    LabelPanel panel(grid.size(), std::move(annotation_dates), dates);
    std::vector<std::uint8_t> seen(grid.size() * dates.size(), 0);
    for (const auto& r : t.rows()) {
        const raster::PatchId id{static_cast<int>(csv::parse_int(r[1])), static_cast<int>(csv::parse_int(r[2]))};
        auto p = grid.index_of(id);
        if (!p) throw FormatError(path.string() + ": patch not in grid");
        const auto d = date_index.at(Date::parse(r[3]));
        auto& s = seen[*p * dates.size() + d];
        if (s) throw FormatError(path.string() + ": duplicate (patch, date) entry");
        s = 1;
        panel.set(*p, d, parse_label(r[4]));
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw FormatError(path.string() + ": label panel is missing (patch, date) entries");
    return panel;
}

void write_split(const SplitAssignment& split, const fs::path& path) {
    csv::Writer w(path, {"row", "col", "split"});
    for (const auto& [id, s] : split.assignment()) {
        w.field(id.row).field(id.col).field(to_string(s));
        w.end_row();
    }
    w.close();
}

SplitAssignment read_split(const fs::path& path, double train_fraction, std::uint64_t seed) {
    const auto t = csv::Table::read(path);
    t.require_header({"row", "col", "split"});
    std::map<raster::PatchId, Split> m;
    for (const auto& r : t.rows())
        m[{static_cast<int>(csv::parse_int(r[0])), static_cast<int>(csv::parse_int(r[1]))}] = parse_split(r[2]);
    return SplitAssignment(std::move(m), train_fraction, seed);
}

}  // namespace destrack::labels
