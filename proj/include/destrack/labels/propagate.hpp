#pragma once

#include <span>
#include <vector>

#include "destrack/labels/labels.hpp"

namespace destrack::labels {

/// One dated observation on a single patch's timeline.
struct TimelineEntry {
    Date date;
    Label label = Label::Unknown;
};

/// Label of a single patch at image date `t`, given its annotation
/// timeline sorted by date.
///
/// Rules, first match wins:
///  1. latest annotation at or before t is Destroyed  -> Destroyed
///  2. earliest annotation at or after t is Intact    -> Intact
///  3. otherwise (Intact then Destroyed, after the last Intact annotation,
///     before a first Destroyed annotation, or an Unknown governing
///     annotation)                                    -> Unknown
Label propagate_at(std::span<const TimelineEntry> timeline, Date t);

/// Dense (patch index x image date) label table.
class LabelPanel {
public:
    LabelPanel() = default;
    LabelPanel(std::size_t patch_count, std::vector<Date> annotation_dates, std::vector<Date> image_dates);

    std::size_t patch_count() const { return patch_count_; }
    const std::vector<Date>& annotation_dates() const { return annotation_dates_; }
    const std::vector<Date>& image_dates() const { return image_dates_; }

    Label at(std::size_t patch, std::size_t date_index) const {
        return labels_[patch * image_dates_.size() + date_index];
    }
    void set(std::size_t patch, std::size_t date_index, Label l) {
        labels_[patch * image_dates_.size() + date_index] = l;
    }
    std::span<const Label> row(std::size_t patch) const {
        return std::span<const Label>(labels_).subspan(patch * image_dates_.size(), image_dates_.size());
    }

    std::size_t count(Label l) const;

    friend bool operator==(const LabelPanel&, const LabelPanel&) = default;

private:
    std::size_t patch_count_ = 0;
    std::vector<Date> annotation_dates_;
    std::vector<Date> image_dates_;
    std::vector<Label> labels_;
};

/// Temporal label propagation under the no-reconstruction assumption.
/// Snapshots may come in any order; they must all cover the same patches.
/// Throws ConfigError on an empty snapshot list or mismatched sizes.
LabelPanel propagate(std::span<const AnnotationSnapshot> snapshots, std::span<const Date> image_dates);

/// True if no patch goes Destroyed -> (Intact) at a later date, ignoring
/// Unknown entries.
bool is_monotone(const LabelPanel& panel);

}  // namespace destrack::labels
