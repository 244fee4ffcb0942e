#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "destrack/smoother/forest.hpp"

namespace destrack::smoother {

struct CutoffCalibration {
    double threshold = 0.0;
    double achieved_train_recall = 0.0;
};

/// Largest score s such that recall of (score >= s) on `labels` reaches
/// `target_recall`. Throws ClassError without positives, ConfigError unless
/// 0 < target_recall <= 1, DimensionError on a length mismatch.
CutoffCalibration calibrate_cutoff(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                   double target_recall = 0.5);

/// Fills stage-2 scores for every cell and binary = (stage2 >= threshold).
void smooth_panel(ScorePanel& panel, const raster::PatchGrid& grid, const RandomForestModel& model,
                  const CutoffCalibration& calibration, const FeatureOptions& options = {}, int jobs = 1);

/// Copies the listed rows into a new matrix.
FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> rows);

}  // namespace destrack::smoother
