#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "destrack/labels/labels.hpp"
#include "destrack/nn/network.hpp"
#include "destrack/nn/train.hpp"
#include "destrack/smoother/features.hpp"
#include "destrack/smoother/forest.hpp"
#include "destrack/synth/city.hpp"

namespace destrack::pipeline {

struct SynthSettings {
    synth::CityConfig city;
    synth::RenderSpec render;
    double no_analysis_share = 0.04;
    double decoy_share = 0.1;
};

struct CityInputs {
    std::string name;
    std::optional<SynthSettings> synth;  // inputs are generated under the run directory
    std::filesystem::path rasters;       // directory of PNG + JSON sidecars
    std::filesystem::path aoi;
    std::filesystem::path annotations;   // CSV file or directory of CSV files
    std::filesystem::path events;        // optional
};

struct RunConfig {
    std::filesystem::path output_dir = "run";
    int jobs = 1;
    int patch_size = raster::kDefaultPatchSize;
    labels::DateBinding date_binding = labels::DateBinding::Exact;

    double split_fraction = 0.7;
    std::uint64_t split_seed = 1;
    /// Share of Train patches held out of CNN fitting for model selection.
    double validation_fraction = 0.2;

    nn::NetworkSpec net;
    nn::TrainConfig train;
    bool hyperparameter_search = false;
    std::size_t max_positives = 3000;
    std::size_t max_negatives = 6000;
    std::size_t max_validation = 4000;

    smoother::ForestParams forest;
    smoother::FeatureOptions features;
    std::size_t forest_max_rows = 300000;
    double target_recall = 0.5;

    std::vector<CityInputs> cities;

    /// Normalized key=value text of the effective settings.
    std::string canonical() const;
    /// Throws ConfigError on invalid values or missing input paths.
    void validate() const;
};

/// Key = value lines, '#' comments, and "[city NAME]" sections. Relative
/// paths resolve against `base_dir`. Throws ConfigError naming the line on
/// unknown keys or bad values.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Replaces every seed in the config with one derived from `seed`.
void apply_seed_override(RunConfig& config, std::uint64_t seed);

/// Annotation indices spread over the post dates: round(k (D-1) / 4), k = 1..4.
std::vector<int> default_annotation_indices(int date_count);

}  // namespace destrack::pipeline
