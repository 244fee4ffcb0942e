#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "destrack/common/date.hpp"
#include "destrack/raster/patch_grid.hpp"

namespace destrack::smoother {

/// Dense per-patch, per-date scores. Patch order follows the grid's
/// included order. Stage-2 scores and binary calls are absent until the
/// panel has been smoothed.
class ScorePanel {
public:
    ScorePanel() = default;
    ScorePanel(std::string city_id, std::vector<raster::PatchId> patches, std::vector<Date> dates);

    const std::string& city_id() const { return city_id_; }
    const std::vector<raster::PatchId>& patches() const { return patches_; }
    const std::vector<Date>& dates() const { return dates_; }
    std::size_t patch_count() const { return patches_.size(); }
    std::size_t date_count() const { return dates_.size(); }

    /// Throws LookupError if the date is not in the panel.
    std::size_t date_index(Date d) const;

    double stage1(std::size_t p, std::size_t t) const { return stage1_[p * dates_.size() + t]; }
    void set_stage1(std::size_t p, std::size_t t, double v) { stage1_[p * dates_.size() + t] = v; }

    bool has_stage2() const { return has_stage2_; }
    std::optional<double> stage2(std::size_t p, std::size_t t) const;
    std::optional<int> binary(std::size_t p, std::size_t t) const;
    void set_stage2(std::size_t p, std::size_t t, double score, int binary);

    /// Absent stage-2 entries compare equal to each other.
    friend bool operator==(const ScorePanel& a, const ScorePanel& b);

private:
    std::string city_id_;
    std::vector<raster::PatchId> patches_;
    std::vector<Date> dates_;
    std::vector<double> stage1_;
    std::vector<double> stage2_;
    std::vector<std::int8_t> binary_;
    bool has_stage2_ = false;
};

/// CSV city_id,row,col,date,stage1
void write_stage1_csv(const ScorePanel& panel, const std::filesystem::path& path);
/// CSV city_id,row,col,date,stage1,stage2,binary
void write_smoothed_csv(const ScorePanel& panel, const std::filesystem::path& path);

/// Reads either CSV layout. Rows must cover every (grid patch, date) pair.
ScorePanel read_panel_csv(const std::filesystem::path& path, const raster::PatchGrid& grid);

}  // namespace destrack::smoother
