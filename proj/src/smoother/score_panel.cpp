#include "destrack/smoother/score_panel.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"

namespace destrack::smoother {

ScorePanel::ScorePanel(std::string city_id, std::vector<raster::PatchId> patches, std::vector<Date> dates)
    : city_id_(std::move(city_id)),
      patches_(std::move(patches)),
      dates_(std::move(dates)),
      stage1_(patches_.size() * dates_.size(), 0.0),
      stage2_(patches_.size() * dates_.size(), std::numeric_limits<double>::quiet_NaN()),
      binary_(patches_.size() * dates_.size(), -1) {}

std::size_t ScorePanel::date_index(Date d) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end() || *it != d) throw LookupError("date " + d.iso() + " is not in the score panel");
    return static_cast<std::size_t>(it - dates_.begin());
}

std::optional<double> ScorePanel::stage2(std::size_t p, std::size_t t) const {
    const double v = stage2_[p * dates_.size() + t];
    if (std::isnan(v)) return std::nullopt;
    return v;
}

std::optional<int> ScorePanel::binary(std::size_t p, std::size_t t) const {
    const auto v = binary_[p * dates_.size() + t];
    if (v < 0) return std::nullopt;
    return v;
}

void ScorePanel::set_stage2(std::size_t p, std::size_t t, double score, int binary) {
    stage2_[p * dates_.size() + t] = score;
    binary_[p * dates_.size() + t] = static_cast<std::int8_t>(binary);
    has_stage2_ = true;
}

bool operator==(const ScorePanel& a, const ScorePanel& b) {
    if (a.city_id_ != b.city_id_ || a.patches_ != b.patches_ || a.dates_ != b.dates_ || a.stage1_ != b.stage1_ ||
        a.binary_ != b.binary_ || a.has_stage2_ != b.has_stage2_)
        return false;
    for (std::size_t i = 0; i < a.stage2_.size(); ++i) {
        const bool na = std::isnan(a.stage2_[i]), nb = std::isnan(b.stage2_[i]);
        if (na != nb || (!na && a.stage2_[i] != b.stage2_[i])) return false;
    }
    return true;
}

namespace {

void write_panel(const ScorePanel& panel, const std::filesystem::path& path, bool smoothed) {
    std::vector<std::string> header{"city_id", "row", "col", "date", "stage1"};
    if (smoothed) {
        if (!panel.has_stage2()) throw StateError("panel has not been smoothed");
        header.insert(header.end(), {"stage2", "binary"});
    }
    csv::Writer w(path, header);
    std::vector<std::string> dates;
    for (const auto& d : panel.dates()) dates.push_back(d.iso());
    for (std::size_t p = 0; p < panel.patch_count(); ++p) {
        const auto& id = panel.patches()[p];
        for (std::size_t t = 0; t < panel.date_count(); ++t) {
            w.field(panel.city_id()).field(id.row).field(id.col).field(dates[t]).field(panel.stage1(p, t));
            if (smoothed) {
                const auto s2 = panel.stage2(p, t);
                const auto b = panel.binary(p, t);
                if (!s2 || !b) throw StateError("panel has cells without stage-2 scores");
                w.field(*s2).field(*b);
            }
            w.end_row();
        }
    }
    w.close();
}

}  // namespace

void write_stage1_csv(const ScorePanel& panel, const std::filesystem::path& path) { write_panel(panel, path, false); }

void write_smoothed_csv(const ScorePanel& panel, const std::filesystem::path& path) { write_panel(panel, path, true); }

ScorePanel read_panel_csv(const std::filesystem::path& path, const raster::PatchGrid& grid) {
    const auto t = csv::Table::read(path);
    const bool smoothed = t.header().size() == 7;
    if (smoothed)
        t.require_header({"city_id", "row", "col", "date", "stage1", "stage2", "binary"});
    else
        t.require_header({"city_id", "row", "col", "date", "stage1"});

    std::vector<Date> dates;
    for (const auto& r : t.rows()) dates.push_back(Date::parse(r[3]));
    std::sort(dates.begin(), dates.end());
    dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
    std::map<std::string, std::size_t> date_index;
    for (std::size_t i = 0; i < dates.size(); ++i) date_index[dates[i].iso()] = i;

    ScorePanel panel(grid.city_id(), std::vector<raster::PatchId>(grid.included().begin(), grid.included().end()),
                     dates);
    std::vector<std::uint8_t> seen(grid.size() * dates.size(), 0);
    for (const auto& r : t.rows()) {
        const raster::PatchId id{static_cast<int>(csv::parse_int(r[1])), static_cast<int>(csv::parse_int(r[2]))};
        const auto p = grid.index_of(id);
        if (!p) throw FormatError(path.string() + ": patch (" + r[1] + "," + r[2] + ") is not in the grid");
        const auto d = date_index.at(r[3]);
        seen[*p * dates.size() + d] = 1;
        panel.set_stage1(*p, d, csv::parse_double(r[4]));
        if (smoothed) panel.set_stage2(*p, d, csv::parse_double(r[5]), static_cast<int>(csv::parse_int(r[6])));
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw FormatError(path.string() + ": score panel is missing (patch, date) entries");
    return panel;
}

}  // namespace destrack::smoother
