#pragma once

#include <filesystem>
#include <vector>

#include "destrack/labels/labels.hpp"
#include "destrack/labels/propagate.hpp"
#include "destrack/labels/split.hpp"

namespace destrack::labels {

/// CSV lon,lat,date,damage_class
std::vector<Annotation> read_annotations(const std::filesystem::path& path);
void write_annotations(std::span<const Annotation> annotations, const std::filesystem::path& path);

/// CSV city_id,row,col,date,label with one row per (included patch, date).
void write_label_panel(const LabelPanel& panel, const raster::PatchGrid& grid, const std::filesystem::path& path);
/// Reads back a panel written for `grid`; annotation dates are supplied by
/// the caller since the CSV does not carry them.
LabelPanel read_label_panel(const std::filesystem::path& path, const raster::PatchGrid& grid,
                            std::vector<Date> annotation_dates);

/// CSV row,col,split
void write_split(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment read_split(const std::filesystem::path& path, double train_fraction, std::uint64_t seed);

}  // namespace destrack::labels
