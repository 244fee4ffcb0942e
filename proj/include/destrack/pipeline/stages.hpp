#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "destrack/pipeline/config.hpp"
#include "destrack/pipeline/manifest.hpp"

namespace destrack::pipeline {

/// File locations of one city inside the run directory.
struct CityPaths {
    std::filesystem::path dir;
    std::filesystem::path truth;            // synthetic cities only
    std::filesystem::path grid;
    std::filesystem::path labels;
    std::filesystem::path split;
    std::filesystem::path validation_split;
    std::filesystem::path train_samples;
    std::filesystem::path model;
    std::filesystem::path history;
    std::filesystem::path search;
    std::filesystem::path stage1;
    std::filesystem::path forest;
    std::filesystem::path forest_samples;
    std::filesystem::path calibration;
    std::filesystem::path smoothed;
    std::filesystem::path report_stage1;
    std::filesystem::path report_stage2;
    std::filesystem::path pr_stage1;
    std::filesystem::path pr_stage1_balanced;
    std::filesystem::path pr_stage2;
    std::filesystem::path pr_stage2_balanced;
    std::filesystem::path pr_svg;
    std::filesystem::path audit;
    std::filesystem::path event_mapping;
    std::filesystem::path eventstudy;
    std::filesystem::path eventstudy_svg;
};

CityPaths city_paths(const RunConfig& config, const CityInputs& city);
std::filesystem::path summary_path(const RunConfig& config);

struct AuditResult {
    bool passed = false;
    std::size_t rows_checked = 0;
    std::size_t test_rows_found = 0;
    std::vector<std::string> files;
};

/// Checks that no patch listed in the training-input files is in the Test
/// split. Writes nothing.
AuditResult audit_split_hygiene(const CityPaths& paths);

/// Table-1 style row.
struct SummaryRow {
    std::string city;
    std::size_t total_samples = 0;
    std::size_t dates = 0;
    std::size_t labeled_samples = 0;
    double share_destroyed = 0.0;
    double auc = 0.0;
    double ap_balanced = 0.0;
    double ap_unbalanced = 0.0;
    std::size_t destroyed_final = 0;
};

inline const std::vector<std::string> kSummaryHeader{"city",          "total_samples", "dates",
                                                     "labeled_samples", "share_destroyed", "auc",
                                                     "ap_balanced",   "ap_unbalanced", "destroyed_final"};

/// Runs stages for every city in the config, recording each in the
/// manifest. With `resume`, stages whose recorded inputs and outputs are
/// unchanged are skipped. Holds the run directory lock while alive.
class Pipeline {
public:
    Pipeline(RunConfig config, bool resume, std::ostream& log);

    static const std::vector<std::string>& commands();
    /// Dispatches one of commands(). Throws ConfigError on an unknown name.
    void run(const std::string& command);

    void synth();
    void tile();
    void label();
    void split();
    void train();
    void scan();
    void smooth();
    void evaluate();
    void eventstudy();
    void report();
    /// synth (synthetic cities) -> tile -> label -> split -> train -> scan
    /// -> smooth -> evaluate -> eventstudy (when events exist) -> report
    void pipeline();

    const RunConfig& config() const { return cfg_; }
    const Manifest& manifest() const { return manifest_; }

private:
    void stage(const std::string& name, const CityInputs& city, const std::vector<std::filesystem::path>& inputs,
               const std::function<std::vector<std::filesystem::path>()>& body);
    std::vector<std::filesystem::path> raster_files(const CityInputs& city, bool pixels) const;
    std::vector<std::filesystem::path> annotation_files(const CityInputs& city) const;

    RunConfig cfg_;
    bool resume_;
    std::ostream& log_;
    RunLock lock_;
    Manifest manifest_;
};

}  // namespace destrack::pipeline
