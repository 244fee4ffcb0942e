#include "destrack/smoother/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "destrack/common/error.hpp"
#include "destrack/common/parallel.hpp"
#include "destrack/common/random.hpp"

namespace destrack::smoother {

namespace {

constexpr int kMaxCuts = 255;
constexpr const char* kFormat = "destrack-forest";
constexpr int kVersion = 1;

// Candidate thresholds for one feature, ascending.
std::vector<double> make_cuts(const FeatureMatrix& x, std::size_t f) {
    std::vector<double> v(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) v[i] = x.values[i * x.cols + f];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    std::vector<double> cuts;
    if (v.size() < 2) return cuts;
    const std::size_t gaps = v.size() - 1;
    if (gaps <= static_cast<std::size_t>(kMaxCuts)) {
        for (std::size_t i = 0; i < gaps; ++i) cuts.push_back(v[i] + (v[i + 1] - v[i]) / 2);
    } else {
        for (int c = 1; c <= kMaxCuts; ++c) {
            const std::size_t i = gaps * c / (kMaxCuts + 1);
            const double cut = v[i] + (v[i + 1] - v[i]) / 2;
            if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
        }
    }
    return cuts;
}

struct Binned {
    std::vector<std::vector<double>> cuts;   // per feature
    std::vector<std::uint8_t> bins;          // rows x cols, bin = number of cuts <= value
};

Binned bin_features(const FeatureMatrix& x, int jobs) {
    Binned b;
    b.cuts.resize(x.cols);
    b.bins.resize(x.rows * x.cols);
    parallel_for(x.cols, jobs, [&](std::size_t f) {
        b.cuts[f] = make_cuts(x, f);
        const auto& c = b.cuts[f];
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double v = x.values[i * x.cols + f];
            b.bins[i * x.cols + f] = static_cast<std::uint8_t>(std::upper_bound(c.begin(), c.end(), v) - c.begin());
        }
    });
    return b;
}

double gini_sum(double w, double pos) {
    // w * gini = w * (1 - p^2 - q^2) = 2 * pos * neg / w
    if (w <= 0) return 0.0;
    return 2.0 * pos * (w - pos) / w;
}

struct Builder {
    const Binned& bins;
    std::size_t cols;
    std::span<const std::uint8_t> labels;
    const ForestParams& params;
    Rng rng;
    DecisionTree tree;

    struct Item {
        std::uint32_t row;
        std::uint32_t weight;
    };

    int grow(std::vector<Item>& items, std::size_t lo, std::size_t hi, int depth) {
        double w = 0, pos = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            w += items[i].weight;
            pos += labels[items[i].row] ? items[i].weight : 0;
        }
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[index].value = pos / w;
        if (depth >= params.max_depth || pos == 0 || pos == w || w < 2.0 * params.min_leaf) return index;

        // Features sampled without replacement (partial Fisher-Yates).
        std::vector<int> feats(cols);
        std::iota(feats.begin(), feats.end(), 0);
        const std::size_t m = std::min<std::size_t>(params.features_per_split, cols);
        for (std::size_t i = 0; i < m; ++i) std::swap(feats[i], feats[i + rng.below(cols - i)]);

        const double parent = gini_sum(w, pos);
        double best_gain = 1e-12;
        int best_f = -1, best_bin = -1;
        std::vector<double> hw(kMaxCuts + 1), hp(kMaxCuts + 1);
        for (std::size_t k = 0; k < m; ++k) {
            const int f = feats[k];
            const std::size_t nb = bins.cuts[f].size() + 1;
            if (nb < 2) continue;
            std::fill(hw.begin(), hw.begin() + nb, 0.0);
            std::fill(hp.begin(), hp.begin() + nb, 0.0);
            for (std::size_t i = lo; i < hi; ++i) {
                const auto b = bins.bins[static_cast<std::size_t>(items[i].row) * cols + f];
                hw[b] += items[i].weight;
                if (labels[items[i].row]) hp[b] += items[i].weight;
            }
            double lw = 0, lp = 0;
            // Split after bin b: left = bins 0..b, threshold = cuts[b].
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                lw += hw[b];
                lp += hp[b];
                if (lw < params.min_leaf) continue;
                const double rw = w - lw;
                if (rw < params.min_leaf) break;
                const double gain = parent - gini_sum(lw, lp) - gini_sum(rw, pos - lp);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = f;
                    best_bin = static_cast<int>(b);
                }
            }
        }
        if (best_f < 0) return index;

        const auto mid = std::stable_partition(items.begin() + lo, items.begin() + hi, [&](const Item& it) {
            return bins.bins[static_cast<std::size_t>(it.row) * cols + best_f] <= best_bin;
        });
        const std::size_t split = mid - items.begin();
        const int left = grow(items, lo, split, depth + 1);
        const int right = grow(items, split, hi, depth + 1);
        auto& node = tree.nodes[index];
        node.feature = best_f;
        node.threshold = bins.cuts[best_f][best_bin];
        node.left = left;
        node.right = right;
        return index;
    }
};

}  // namespace

void ForestParams::validate() const {
    if (num_trees < 1) throw ConfigError("num_trees must be >= 1");
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
    if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
    if (features_per_split < 1) throw ConfigError("features_per_split must be >= 1");
}

double DecisionTree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
}

int DecisionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[nodes[i].left] = d[i] + 1;
            d[nodes[i].right] = d[i] + 1;
        }
    }
    return best;
}

double RandomForestModel::predict(std::span<const double> x) const {
    double s = 0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
}

std::vector<double> RandomForestModel::predict(const FeatureMatrix& x, int jobs) const {
    if (x.cols != num_features) throw DimensionError("feature count differs from the forest");
    std::vector<double> out(x.rows);
    parallel_for(x.rows, jobs, [&](std::size_t i) { out[i] = predict(x.row(i)); });
    return out;
}

ForestFit train_forest(const FeatureMatrix& x, std::span<const std::uint8_t> labels, const ForestParams& params) {
    params.validate();
    if (labels.size() != x.rows) throw DimensionError("label count differs from feature rows");
    std::size_t pos = 0;
    for (auto l : labels) pos += l ? 1 : 0;
    if (pos == 0 || pos == labels.size())
        throw ClassError("forest needs both classes (" + std::to_string(pos) + " positives of " +
                         std::to_string(labels.size()) + ")");
    if (x.rows > 0xffffffffULL) throw DimensionError("too many training rows");

    const Binned bins = bin_features(x, params.jobs);
    ForestFit fit;
    fit.model.params = params;
    fit.model.num_features = x.cols;
    fit.model.trees.resize(params.num_trees);
    std::vector<std::vector<std::uint32_t>> counts(params.num_trees);

    parallel_for(params.num_trees, params.jobs, [&](std::size_t t) {
        Builder b{bins, x.cols, labels, params, Rng(derive_seed(params.seed, 0xf0e5, t)), {}};
        auto& c = counts[t];
        c.assign(x.rows, 0);
        for (std::size_t i = 0; i < x.rows; ++i) ++c[b.rng.below(x.rows)];
        std::vector<Builder::Item> items;
        for (std::size_t i = 0; i < x.rows; ++i)
            if (c[i]) items.push_back({static_cast<std::uint32_t>(i), c[i]});
        b.grow(items, 0, items.size(), 0);
        fit.model.trees[t] = std::move(b.tree);
    });

    fit.oob_scores.resize(x.rows);
    parallel_for(x.rows, params.jobs, [&](std::size_t i) {
        double s = 0;
        int n = 0;
        for (int t = 0; t < params.num_trees; ++t)
            if (counts[t][i] == 0) {
                s += fit.model.trees[t].predict(x.row(i));
                ++n;
            }
        fit.oob_scores[i] = n ? s / n : fit.model.predict(x.row(i));
    });
    return fit;
}

void save_forest(const RandomForestModel& model, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["num_trees"] = model.params.num_trees;
    j["max_depth"] = model.params.max_depth;
    j["min_leaf"] = model.params.min_leaf;
    j["features_per_split"] = model.params.features_per_split;
    j["bootstrap_seed"] = model.params.seed;
    j["num_features"] = model.num_features;
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : model.trees) {
        nlohmann::ordered_json tj;
        std::vector<int> feature, left, right;
        std::vector<double> threshold, value;
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        tj["feature"] = feature;
        tj["threshold"] = threshold;
        tj["left"] = left;
        tj["right"] = right;
        tj["value"] = value;
        trees.push_back(std::move(tj));
    }
    j["trees"] = std::move(trees);
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump() << '\n';
}

RandomForestModel load_forest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format").get<std::string>() != kFormat) throw FormatError(path.string() + " is not a forest file");
        if (j.at("version").get<int>() != kVersion) throw FormatError("unsupported forest version");
        RandomForestModel m;
        m.params.num_trees = j.at("num_trees").get<int>();
        m.params.max_depth = j.at("max_depth").get<int>();
        m.params.min_leaf = j.at("min_leaf").get<int>();
        m.params.features_per_split = j.at("features_per_split").get<int>();
        m.params.seed = j.at("bootstrap_seed").get<std::uint64_t>();
        m.num_features = j.at("num_features").get<std::size_t>();
        for (const auto& tj : j.at("trees")) {
            const auto feature = tj.at("feature").get<std::vector<int>>();
            const auto threshold = tj.at("threshold").get<std::vector<double>>();
            const auto left = tj.at("left").get<std::vector<int>>();
            const auto right = tj.at("right").get<std::vector<int>>();
            const auto value = tj.at("value").get<std::vector<double>>();
            const std::size_t n = feature.size();
            if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
                throw FormatError("malformed tree in " + path.string());
            DecisionTree t;
            for (std::size_t i = 0; i < n; ++i) {
                TreeNode node{feature[i], threshold[i], left[i], right[i], value[i]};
                if (node.feature >= static_cast<int>(m.num_features) ||
                    (node.feature >= 0 && (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                                           node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n))))
                    throw FormatError("malformed tree node in " + path.string());
                t.nodes.push_back(node);
            }
            m.trees.push_back(std::move(t));
        }
        if (m.trees.size() != static_cast<std::size_t>(m.params.num_trees))
            throw FormatError("tree count differs from num_trees");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace destrack::smoother
