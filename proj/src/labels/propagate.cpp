#include "destrack/labels/propagate.hpp"

#include <algorithm>

#include "destrack/common/error.hpp"

namespace destrack::labels {

Label propagate_at(std::span<const TimelineEntry> timeline, Date t) {
    const TimelineEntry* prev = nullptr;
    const TimelineEntry* next = nullptr;
    for (const auto& e : timeline) {
        if (e.date <= t) prev = &e;
        if (e.date >= t && !next) next = &e;
    }
    if (prev && prev->label == Label::Destroyed) return Label::Destroyed;
    if (next && next->label == Label::Intact) return Label::Intact;
    return Label::Unknown;
}

LabelPanel::LabelPanel(std::size_t patch_count, std::vector<Date> annotation_dates, std::vector<Date> image_dates)
    : patch_count_(patch_count),
      annotation_dates_(std::move(annotation_dates)),
      image_dates_(std::move(image_dates)),
      labels_(patch_count * image_dates_.size(), Label::Unknown) {}

std::size_t LabelPanel::count(Label l) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

LabelPanel propagate(std::span<const AnnotationSnapshot> snapshots, std::span<const Date> image_dates) {
    if (snapshots.empty()) throw ConfigError("label propagation needs at least one annotation date");
    std::vector<const AnnotationSnapshot*> order;
    for (const auto& s : snapshots) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->date < b->date; });
    const std::size_t patches = order.front()->labels.size();
    std::vector<Date> annotation_dates;
    for (auto* s : order) {
        if (s->labels.size() != patches) throw ConfigError("annotation snapshots cover different patch sets");
        if (!annotation_dates.empty() && annotation_dates.back() == s->date)
            throw ConfigError("duplicate annotation date " + s->date.iso());
        annotation_dates.push_back(s->date);
    }

    LabelPanel panel(patches, annotation_dates, std::vector<Date>(image_dates.begin(), image_dates.end()));
    std::vector<TimelineEntry> timeline(order.size());
    for (std::size_t p = 0; p < patches; ++p) {
        for (std::size_t k = 0; k < order.size(); ++k) timeline[k] = {order[k]->date, order[k]->labels[p]};
        for (std::size_t t = 0; t < image_dates.size(); ++t) panel.set(p, t, propagate_at(timeline, image_dates[t]));
    }
    return panel;
}

bool is_monotone(const LabelPanel& panel) {
    for (std::size_t p = 0; p < panel.patch_count(); ++p) {
        bool destroyed = false;
        for (auto l : panel.row(p)) {
            if (l == Label::Destroyed) destroyed = true;
            if (destroyed && l == Label::Intact) return false;
        }
    }
    return true;
}

}  // namespace destrack::labels
