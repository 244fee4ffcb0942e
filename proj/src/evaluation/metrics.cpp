#include "destrack/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "destrack/common/error.hpp"

namespace destrack::evaluation {

ScoredLabelSet::ScoredLabelSet(std::vector<double> scores, std::vector<std::uint8_t> labels)
    : scores_(std::move(scores)), labels_(std::move(labels)) {
    if (scores_.size() != labels_.size()) throw DimensionError("scores and labels differ in length");
    for (auto l : labels_) {
        if (l > 1) throw ConfigError("labels must be 0 or 1");
        positives_ += l;
    }
}

void ScoredLabelSet::add(double score, bool positive) {
    scores_.push_back(score);
    labels_.push_back(positive ? 1 : 0);
    positives_ += positive ? 1 : 0;
}

namespace {

std::vector<std::size_t> order_by_score(const std::vector<double>& scores, bool descending) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    return idx;
}

}  // namespace

double roc_auc(const ScoredLabelSet& set) {
    const auto P = set.positives();
    const auto N = set.negatives();
    if (P == 0 || N == 0)
        throw ClassError("AUC needs both classes (" + std::to_string(P) + " positives, " + std::to_string(N) +
                         " negatives)");
    const auto& s = set.scores();
    const auto idx = order_by_score(s, false);
    // Twice the positive midrank sum stays an exact integer in double.
    double twice_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && s[idx[j]] == s[idx[i]]) ++j;
        const double twice_midrank = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j)/2
        for (std::size_t k = i; k < j; ++k)
            if (set.labels()[idx[k]]) twice_rank_sum += twice_midrank;
        i = j;
    }
    const double Pd = static_cast<double>(P);
    const double twice_u = twice_rank_sum - Pd * (Pd + 1.0);
    return (twice_u / 2.0) / (Pd * static_cast<double>(N));
}

PRCurve pr_curve(const ScoredLabelSet& set) {
    const auto P = set.positives();
    if (P == 0) throw ClassError("precision-recall needs at least one positive");
    const auto& s = set.scores();
    const auto idx = order_by_score(s, true);
    PRCurve curve;
    double tp = 0, fp = 0, prev_recall = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && s[idx[j]] == s[idx[i]]) {
            if (set.labels()[idx[j]])
                tp += 1;
            else
                fp += 1;
            ++j;
        }
        const double recall = tp / static_cast<double>(P);
        const double precision = tp / (tp + fp);
        curve.points.push_back({s[idx[i]], recall, precision});
        curve.average_precision += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return curve;
}

ScoredLabelSet rebalance_upsample(const ScoredLabelSet& set, std::uint64_t) {
    const auto P = set.positives();
    const auto N = set.negatives();
    if (P == 0) throw ClassError("cannot upsample a set without positives");
    ScoredLabelSet out(set.scores(), set.labels());
    if (P >= N) return out;
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.labels()[i]) pos.push_back(i);
    for (std::size_t k = P; k < N; ++k) out.add(set.scores()[pos[k % P]], true);
    return out;
}

Confusion confusion_from_rates(long long total, long long positives, double tpr, double fpr) {
    if (total < 0 || positives < 0 || positives > total) throw ConfigError("need 0 <= positives <= total");
    if (!(tpr >= 0.0 && tpr <= 1.0) || !(fpr >= 0.0 && fpr <= 1.0)) throw ConfigError("rates must lie in [0, 1]");
    Confusion c;
    const long long negatives = total - positives;
    c.tp = std::llround(tpr * static_cast<double>(positives));
    c.fp = std::llround(fpr * static_cast<double>(negatives));
    c.fn = positives - c.tp;
    c.tn = negatives - c.fp;
    if (c.tp + c.fp == 0) throw UndefinedError("precision undefined: no positive predictions");
    c.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    c.balanced_precision = tpr / (tpr + fpr);
    return c;
}

}  // namespace destrack::evaluation
