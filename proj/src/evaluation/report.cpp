#include "destrack/evaluation/report.hpp"

#include <fstream>

#include <json.hpp>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"

namespace destrack::evaluation {

ScoredLabelSet collect(const smoother::ScorePanel& panel, const labels::LabelPanel& labels,
                       const labels::SplitAssignment& split, Stage stage, labels::Split which) {
    if (panel.patch_count() != labels.patch_count() || panel.dates() != labels.image_dates())
        throw DimensionError("score panel and label panel are not aligned");
    if (stage == Stage::Two && !panel.has_stage2()) throw StateError("stage-2 scores requested before smoothing");
    ScoredLabelSet set;
    for (std::size_t p = 0; p < panel.patch_count(); ++p) {
        if (split.of(panel.patches()[p]) != which) continue;
        for (std::size_t t = 0; t < panel.date_count(); ++t) {
            const auto l = labels.at(p, t);
            if (l == labels::Label::Unknown) continue;
            const double s = stage == Stage::One ? panel.stage1(p, t) : *panel.stage2(p, t);
            set.add(s, l == labels::Label::Destroyed);
        }
    }
    return set;
}

StageReport stage_report(const ScoredLabelSet& set) {
    StageReport r;
    r.auc = roc_auc(set);
    r.pr_unbalanced = pr_curve(set);
    r.pr_balanced = pr_curve(rebalance_upsample(set));
    r.ap_unbalanced = r.pr_unbalanced.average_precision;
    r.ap_balanced = r.pr_balanced.average_precision;
    r.n_test = set.size();
    r.positives = set.positives();
    r.prevalence = set.prevalence();
    return r;
}

RunReport evaluate_run(const smoother::ScorePanel& panel, const labels::LabelPanel& labels,
                       const labels::SplitAssignment& split, labels::Split which) {
    RunReport report;
    report.city = panel.city_id();
    const auto s1 = collect(panel, labels, split, Stage::One, which);
    if (s1.size() == 0) throw InputError("no labeled cells in the " + std::string(to_string(which)) + " split");
    report.stage1 = stage_report(s1);
    if (panel.has_stage2()) report.stage2 = stage_report(collect(panel, labels, split, Stage::Two, which));
    return report;
}

void write_report_json(const StageReport& report, const std::string& city, int stage,
                       const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["city"] = city;
    j["stage"] = stage;
    j["auc"] = report.auc;
    j["ap_unbalanced"] = report.ap_unbalanced;
    j["ap_balanced"] = report.ap_balanced;
    j["n_test"] = report.n_test;
    j["prevalence"] = report.prevalence;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_pr_csv(const PRCurve& curve, const std::filesystem::path& path) {
    csv::Writer w(path, {"threshold", "recall", "precision"});
    for (const auto& p : curve.points) {
        w.field(p.threshold).field(p.recall).field(p.precision);
        w.end_row();
    }
    w.close();
}

}  // namespace destrack::evaluation
