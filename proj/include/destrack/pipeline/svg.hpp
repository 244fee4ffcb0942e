#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "destrack/evaluation/metrics.hpp"
#include "destrack/event_study/event_study.hpp"

namespace destrack::pipeline {

struct NamedCurve {
    std::string label;
    const evaluation::PRCurve* curve = nullptr;
};

/// Precision (y) against recall (x), one polyline per curve with legend.
/// Coordinates are printed with two decimals.
void write_pr_svg(const std::vector<NamedCurve>& curves, const std::string& title,
                  const std::filesystem::path& path);

/// Coefficients for bins -5..+5 as points joined by a line, a zero line
/// for the reference and a dashed vertical line at the event bin.
void write_event_study_svg(const event_study::RegressionResult& result, const std::string& title,
                           const std::filesystem::path& path);

}  // namespace destrack::pipeline
