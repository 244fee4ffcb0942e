#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "destrack/common/date.hpp"
#include "destrack/raster/geo_raster.hpp"
#include "destrack/raster/patch_grid.hpp"

namespace destrack::labels {

enum class DamageClass { Moderate, Severe, Destroyed };
enum class Label : std::uint8_t { Intact = 0, Destroyed = 1, Unknown = 2 };

std::string_view to_string(DamageClass c);
std::string_view to_string(Label l);
DamageClass parse_damage_class(std::string_view s);
Label parse_label(std::string_view s);

/// Point annotation of a damaged structure.
struct Annotation {
    raster::LonLat lonlat;
    Date date;
    DamageClass damage_class = DamageClass::Destroyed;
};

/// Labels of every included grid patch (by patch index) at one annotation date.
struct AnnotationSnapshot {
    Date date;
    std::vector<Label> labels;
};

/// Patch labels at a single annotation date.
///
/// Destroyed if at least one Destroyed annotation falls in the patch,
/// Unknown if only Moderate/Severe annotations do, Intact otherwise.
/// No-analysis patches are always Unknown. Annotations outside the grid
/// are ignored. Throws ConfigError if `date` is not a declared annotation
/// date or an annotation carries a different date.
std::vector<Label> label_at_annotation_date(const raster::PatchGrid& grid, const raster::GeoTransform& geo,
                                            int width, int height, std::span<const Annotation> annotations,
                                            Date date, std::span<const Date> annotation_dates);

inline std::vector<Label> label_at_annotation_date(const raster::PatchGrid& grid, const raster::GeoRaster& raster,
                                                   std::span<const Annotation> annotations, Date date,
                                                   std::span<const Date> annotation_dates) {
    return label_at_annotation_date(grid, raster.geo(), raster.width(), raster.height(), annotations, date,
                                    annotation_dates);
}

enum class DateBinding { Exact, Nearest };

/// Maps each annotation date onto the image date it should label. With
/// Exact the date must be an image date; with Nearest the closest image
/// date wins (earlier one on ties). Throws ConfigError when Exact fails
/// or two annotation dates bind to the same image date.
std::vector<Date> bind_annotation_dates(std::span<const Date> annotation_dates, std::span<const Date> image_dates,
                                        DateBinding mode);

/// Minority class replicated round-robin until both classes have equal
/// counts; Unknown entries are dropped. Returns indices into `labels`:
/// every kept original once, in input order, followed by the replicas.
/// Throws ClassError unless both Destroyed and Intact are present.
std::vector<std::size_t> balance_indices(std::span<const Label> labels);

template <class T, class LabelOf>
std::vector<T> balance_training_set(std::span<const T> samples, LabelOf label_of) {
    std::vector<Label> ls;
    ls.reserve(samples.size());
    for (const auto& s : samples) ls.push_back(label_of(s));
    std::vector<T> out;
    for (auto i : balance_indices(ls)) out.push_back(samples[i]);
    return out;
}

}  // namespace destrack::labels
