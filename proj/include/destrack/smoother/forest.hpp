#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "destrack/smoother/features.hpp"

namespace destrack::smoother {

struct ForestParams {
    int num_trees = 100;
    int max_depth = 12;
    int min_leaf = 5;
    int features_per_split = 4;
    std::uint64_t seed = 1;
    /// Threads for tree fitting. Does not change results.
    int jobs = 1;

    /// Throws ConfigError on non-positive counts or max_depth < 0.
    void validate() const;
};

/// Internal node when feature >= 0: rows with x[feature] < threshold go
/// left. Leaf when feature < 0; value is the positive fraction.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root first

    double predict(std::span<const double> x) const;
    int depth() const;
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct RandomForestModel {
    ForestParams params;
    std::size_t num_features = 0;
    std::vector<DecisionTree> trees;

    /// Mean leaf value over trees.
    double predict(std::span<const double> x) const;
    std::vector<double> predict(const FeatureMatrix& x, int jobs = 1) const;
};

struct ForestFit {
    RandomForestModel model;
    /// Per training row: mean over trees whose bootstrap left the row out,
    /// or the full-forest score if every tree used it.
    std::vector<double> oob_scores;
};

/// Bootstrap-resampled Gini trees. Splits are searched over at most 256
/// candidate cut points per feature, placed midway between adjacent
/// distinct values. Throws ClassError unless both labels occur and
/// DimensionError on a size mismatch.
ForestFit train_forest(const FeatureMatrix& x, std::span<const std::uint8_t> labels, const ForestParams& params);

/// JSON with the hyperparameters, seed and per-tree node arrays.
void save_forest(const RandomForestModel& model, const std::filesystem::path& path);
RandomForestModel load_forest(const std::filesystem::path& path);

}  // namespace destrack::smoother
