#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "destrack/nn/network.hpp"

namespace destrack::nn {

struct TrainConfig {
    double learning_rate = 0.05;
    int batch_size = 32;
    int epochs = 5;
    std::uint64_t seed = 1;
    double weight_init_scale = 1.0;
    /// Threads for the per-batch work. Does not change results.
    int jobs = 1;

    /// Throws ConfigError unless learning_rate > 0, batch_size >= 1, epochs >= 0.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Example {
    const raster::PatchSample* sample = nullptr;
    bool destroyed = false;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double val_auc = 0.0;
};

struct TrainResult {
    NetworkParams params;
    std::vector<EpochRecord> history;
    int best_epoch = 0;  // 0 when no epoch ran
};

/// Mini-batch SGD on mean BCE. Keeps the snapshot with the highest
/// validation AUC. Throws InputError on an empty training set or a
/// validation set without both classes, NumericError (naming the epoch) if
/// the loss stops being finite.
TrainResult train(const NetworkSpec& spec, const TrainConfig& config, std::span<const Example> train_set,
                  std::span<const Example> validation_set);

/// Inference scores for a list of examples, in batches.
std::vector<double> predict(const NetworkSpec& spec, const NetworkParams& params, std::span<const Example> examples,
                            int jobs = 1, int batch_size = 64);

struct Candidate {
    NetworkSpec spec;
    TrainConfig config;
};

struct SearchResult {
    std::size_t best_index = 0;
    std::vector<double> val_aucs;  // best validation AUC per candidate
    TrainResult best;
};

/// Trains every candidate and returns the one with the highest validation
/// AUC; ties go to fewer parameters, then to grid order. Throws ConfigError
/// on an empty grid.
SearchResult hyperparameter_search(std::span<const Candidate> grid, std::span<const Example> train_set,
                                   std::span<const Example> validation_set);

/// blocks {2,3,4} x kernel {3,5} x pool {2} x dropout {0.1,0.3,0.5} x
/// fc_units {64,128} x activation {ReLU, Sigmoid}, all sharing `config`.
std::vector<Candidate> default_search_grid(const TrainConfig& config, int base_filters = 8);

/// CSV epoch,loss,val_auc
void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace destrack::nn
