#include "destrack/smoother/smooth.hpp"

#include <algorithm>
#include <functional>

#include "destrack/common/error.hpp"

namespace destrack::smoother {

CutoffCalibration calibrate_cutoff(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                   double target_recall) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    if (!(target_recall > 0.0 && target_recall <= 1.0)) throw ConfigError("target_recall must be in (0, 1]");
    std::vector<double> pos;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i]) pos.push_back(scores[i]);
    if (pos.empty()) throw ClassError("cutoff calibration needs at least one positive");
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const double P = static_cast<double>(pos.size());
    // Smallest k with k / P >= target.
    std::size_t k = 1;
    while (static_cast<double>(k) / P < target_recall) ++k;
    CutoffCalibration c;
    c.threshold = pos[k - 1];
    const auto hits = std::count_if(pos.begin(), pos.end(), [&](double s) { return s >= c.threshold; });
    c.achieved_train_recall = static_cast<double>(hits) / P;
    return c;
}

void smooth_panel(ScorePanel& panel, const raster::PatchGrid& grid, const RandomForestModel& model,
                  const CutoffCalibration& calibration, const FeatureOptions& options, int jobs) {
    const FeatureMatrix x = build_feature_matrix(panel, grid, options, jobs);
    const auto scores = model.predict(x, jobs);
    const std::size_t T = panel.date_count();
    for (std::size_t p = 0; p < panel.patch_count(); ++p)
        for (std::size_t t = 0; t < T; ++t) {
            const double s = scores[p * T + t];
            panel.set_stage2(p, t, s, s >= calibration.threshold ? 1 : 0);
        }
}

FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
    FeatureMatrix out;
    out.cols = x.cols;
    out.rows = rows.size();
    out.values.reserve(out.rows * out.cols);
    for (auto r : rows) {
        if (r >= x.rows) throw DimensionError("row index out of range");
        const auto row = x.row(r);
        out.values.insert(out.values.end(), row.begin(), row.end());
    }
    return out;
}

}  // namespace destrack::smoother
