#include "destrack/labels/labels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "destrack/common/error.hpp"

namespace destrack::labels {

std::string_view to_string(DamageClass c) {
    switch (c) {
        case DamageClass::Moderate: return "moderate";
        case DamageClass::Severe: return "severe";
        case DamageClass::Destroyed: return "destroyed";
    }
    return "?";
}

std::string_view to_string(Label l) {
    switch (l) {
        case Label::Intact: return "intact";
        case Label::Destroyed: return "destroyed";
        case Label::Unknown: return "unknown";
    }
    return "?";
}

DamageClass parse_damage_class(std::string_view s) {
    if (s == "moderate") return DamageClass::Moderate;
    if (s == "severe") return DamageClass::Severe;
    if (s == "destroyed") return DamageClass::Destroyed;
    throw FormatError("unknown damage class '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
    if (s == "intact") return Label::Intact;
    if (s == "destroyed") return Label::Destroyed;
    if (s == "unknown") return Label::Unknown;
    throw FormatError("unknown label '" + std::string(s) + "'");
}

std::vector<Label> label_at_annotation_date(const raster::PatchGrid& grid, const raster::GeoTransform& geo,
                                            int width, int height, std::span<const Annotation> annotations,
                                            Date date, std::span<const Date> annotation_dates) {
    if (std::find(annotation_dates.begin(), annotation_dates.end(), date) == annotation_dates.end())
        throw ConfigError("date " + date.iso() + " is not a declared annotation date");

    std::vector<std::uint8_t> destroyed(grid.size(), 0);
    std::vector<std::uint8_t> partial(grid.size(), 0);
    for (const auto& a : annotations) {
        if (a.date != date)
            throw ConfigError("annotation dated " + a.date.iso() + " passed for annotation date " + date.iso());
        auto id = raster::point_to_patch(grid, geo, width, height, a.lonlat);
        if (!id) continue;
        const auto idx = *grid.index_of(*id);
        if (a.damage_class == DamageClass::Destroyed)
            destroyed[idx] = 1;
        else
            partial[idx] = 1;
    }
    std::vector<Label> out(grid.size(), Label::Intact);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.is_no_analysis(i))
            out[i] = Label::Unknown;
        else if (destroyed[i])
            out[i] = Label::Destroyed;
        else if (partial[i])
            out[i] = Label::Unknown;
    }
    return out;
}

std::vector<Date> bind_annotation_dates(std::span<const Date> annotation_dates, std::span<const Date> image_dates,
                                        DateBinding mode) {
    if (image_dates.empty()) throw ConfigError("no image dates to bind annotations to");
    std::vector<Date> out;
    for (const auto& a : annotation_dates) {
        if (mode == DateBinding::Exact) {
            if (std::find(image_dates.begin(), image_dates.end(), a) == image_dates.end())
                throw ConfigError("annotation date " + a.iso() + " is not an image date");
            out.push_back(a);
            continue;
        }
        const Date* best = &image_dates.front();
        for (const auto& d : image_dates) {
            const long gap = std::labs(d.days_since_epoch() - a.days_since_epoch());
            const long best_gap = std::labs(best->days_since_epoch() - a.days_since_epoch());
            if (gap < best_gap || (gap == best_gap && d < *best)) best = &d;
        }
        out.push_back(*best);
    }
    auto sorted = out;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("two annotation dates bind to the same image date");
    return out;
}

std::vector<std::size_t> balance_indices(std::span<const Label> labels) {
    std::vector<std::size_t> pos, neg, kept;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == Label::Unknown) continue;
        kept.push_back(i);
        (labels[i] == Label::Destroyed ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty())
        throw ClassError("balancing needs both destroyed and intact samples (got " + std::to_string(pos.size()) +
                         " destroyed, " + std::to_string(neg.size()) + " intact)");
    const auto& minority = pos.size() <= neg.size() ? pos : neg;
    const std::size_t target = std::max(pos.size(), neg.size());
    for (std::size_t k = minority.size(); k < target; ++k) kept.push_back(minority[k % minority.size()]);
    return kept;
}

}  // namespace destrack::labels
