#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace destrack::evaluation {

/// Scores paired with binary labels (1 = destroyed).
class ScoredLabelSet {
public:
    ScoredLabelSet() = default;
    /// Throws DimensionError on length mismatch, ConfigError on labels
    /// other than 0/1.
    ScoredLabelSet(std::vector<double> scores, std::vector<std::uint8_t> labels);

    void add(double score, bool positive);

    const std::vector<double>& scores() const { return scores_; }
    const std::vector<std::uint8_t>& labels() const { return labels_; }
    std::size_t size() const { return scores_.size(); }
    std::size_t positives() const { return positives_; }
    std::size_t negatives() const { return scores_.size() - positives_; }
    double prevalence() const { return size() ? static_cast<double>(positives_) / size() : 0.0; }

private:
    std::vector<double> scores_;
    std::vector<std::uint8_t> labels_;
    std::size_t positives_ = 0;
};

/// Probability that a random positive outscores a random negative, ties
/// credited 1/2, via midranks. Throws ClassError unless both classes occur.
double roc_auc(const ScoredLabelSet& set);

struct PRPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

/// Precision/recall at every distinct score, highest threshold first.
struct PRCurve {
    std::vector<PRPoint> points;
    double average_precision = 0.0;
};

/// Step-summed average precision: sum_n (R_n - R_{n-1}) * P_n.
/// Throws ClassError if there are no positives.
PRCurve pr_curve(const ScoredLabelSet& set);

/// Positives replicated round-robin until they match the negatives within
/// one. Scores are untouched and already-balanced (or positive-majority)
/// sets are returned unchanged. The replication is deterministic; `seed`
/// is accepted for interface stability and does not affect the result.
/// Throws ClassError if there are no positives.
ScoredLabelSet rebalance_upsample(const ScoredLabelSet& set, std::uint64_t seed = 0);

struct Confusion {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;
    double precision = 0.0;
    double balanced_precision = 0.0;
};

/// Confusion counts implied by true/false positive rates on a population
/// with `positives` of `total` destroyed, plus the precision that the same
/// rates give on a 1:1 sample. Throws ConfigError on invalid inputs and
/// UndefinedError when no positive predictions result.
Confusion confusion_from_rates(long long total, long long positives, double tpr, double fpr);

}  // namespace destrack::evaluation
