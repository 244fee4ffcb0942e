#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "destrack/evaluation/metrics.hpp"
#include "destrack/labels/propagate.hpp"
#include "destrack/labels/split.hpp"
#include "destrack/smoother/score_panel.hpp"

namespace destrack::evaluation {

enum class Stage { One, Two };

struct StageReport {
    double auc = 0.0;
    double ap_unbalanced = 0.0;
    double ap_balanced = 0.0;
    std::size_t n_test = 0;
    std::size_t positives = 0;
    double prevalence = 0.0;
    PRCurve pr_unbalanced;
    PRCurve pr_balanced;
};

struct RunReport {
    std::string city;
    StageReport stage1;
    std::optional<StageReport> stage2;
};

/// Scores and labels of every non-Unknown (patch, date) cell whose patch
/// is in `which`. Throws DimensionError if panel and labels disagree.
ScoredLabelSet collect(const smoother::ScorePanel& panel, const labels::LabelPanel& labels,
                       const labels::SplitAssignment& split, Stage stage,
                       labels::Split which = labels::Split::Test);

/// All four metric families for one scored set.
StageReport stage_report(const ScoredLabelSet& set);

/// Held-out metrics for stage 1, and stage 2 when the panel is smoothed.
/// Throws InputError if the chosen split has no labeled cells.
RunReport evaluate_run(const smoother::ScorePanel& panel, const labels::LabelPanel& labels,
                       const labels::SplitAssignment& split, labels::Split which = labels::Split::Test);

/// {"city", "stage", "auc", "ap_unbalanced", "ap_balanced", "n_test", "prevalence"}
void write_report_json(const StageReport& report, const std::string& city, int stage,
                       const std::filesystem::path& path);
/// CSV threshold,recall,precision
void write_pr_csv(const PRCurve& curve, const std::filesystem::path& path);

}  // namespace destrack::evaluation
