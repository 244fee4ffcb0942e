#include "destrack/pipeline/stages.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"
#include "destrack/evaluation/report.hpp"
#include "destrack/event_study/event_study.hpp"
#include "destrack/labels/io.hpp"
#include "destrack/labels/propagate.hpp"
#include "destrack/labels/split.hpp"
#include "destrack/nn/model_io.hpp"
#include "destrack/nn/scan.hpp"
#include "destrack/nn/train.hpp"
#include "destrack/pipeline/svg.hpp"
#include "destrack/raster/io.hpp"
#include "destrack/smoother/smooth.hpp"
#include "destrack/synth/render.hpp"

namespace destrack::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_json(const ordered_json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

struct Cell {
    std::size_t patch;
    std::size_t date;
    bool destroyed;
};

// Up to `cap` cells drawn without replacement, returned in (date, patch) order.
std::vector<Cell> sample_cells(std::vector<Cell> cells, std::size_t cap, std::uint64_t seed) {
    if (cells.size() > cap) {
        Rng rng(seed);
        rng.shuffle(std::span(cells));
        cells.resize(cap);
    }
    std::sort(cells.begin(), cells.end(),
              [](const Cell& a, const Cell& b) { return std::tie(a.date, a.patch) < std::tie(b.date, b.patch); });
    return cells;
}

enum class Role : std::uint8_t { Fit, Validation };

std::map<raster::PatchId, Role> read_roles(const fs::path& path) {
    const auto t = csv::Table::read(path);
    t.require_header({"row", "col", "role"});
    std::map<raster::PatchId, Role> out;
    for (const auto& r : t.rows()) {
        Role role;
        if (r[2] == "fit")
            role = Role::Fit;
        else if (r[2] == "validation")
            role = Role::Validation;
        else
            throw FormatError(path.string() + ": unknown role '" + r[2] + "'");
        out[{static_cast<int>(csv::parse_int(r[0])), static_cast<int>(csv::parse_int(r[1]))}] = role;
    }
    return out;
}

std::vector<Date> post_dates(const std::vector<raster::RasterHeader>& headers) {
    std::vector<Date> out;
    for (std::size_t i = 1; i < headers.size(); ++i) out.push_back(headers[i].capture_date);
    return out;
}

// False when the city's label panel has no Intact or Destroyed cell; the
// model stages are then skipped for it.
bool has_labels(const CityPaths& paths) {
    if (!fs::exists(paths.labels) || !fs::exists(paths.grid)) return true;
    const auto t = csv::Table::read(paths.labels);
    const auto lc = t.column("label");
    for (const auto& r : t.rows())
        if (labels::parse_label(r[lc]) != labels::Label::Unknown) return true;
    return false;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

CityPaths city_paths(const RunConfig& config, const CityInputs& city) {
    CityPaths p;
    p.dir = config.output_dir / city.name;
    p.truth = p.dir / "truth.csv";
    p.grid = p.dir / "grid.csv";
    p.labels = p.dir / "labels.csv";
    p.split = p.dir / "split.csv";
    p.validation_split = p.dir / "validation_split.csv";
    p.train_samples = p.dir / "train_samples.csv";
    p.model = p.dir / "model.json";
    p.history = p.dir / "train_history.csv";
    p.search = p.dir / "search.csv";
    p.stage1 = p.dir / "stage1.csv";
    p.forest = p.dir / "forest.json";
    p.forest_samples = p.dir / "forest_train_samples.csv";
    p.calibration = p.dir / "calibration.json";
    p.smoothed = p.dir / "smoothed.csv";
    p.report_stage1 = p.dir / "report_stage1.json";
    p.report_stage2 = p.dir / "report_stage2.json";
    p.pr_stage1 = p.dir / "pr_stage1.csv";
    p.pr_stage1_balanced = p.dir / "pr_stage1_balanced.csv";
    p.pr_stage2 = p.dir / "pr_stage2.csv";
    p.pr_stage2_balanced = p.dir / "pr_stage2_balanced.csv";
    p.pr_svg = p.dir / "pr_curves.svg";
    p.audit = p.dir / "audit.json";
    p.event_mapping = p.dir / "event_mapping.json";
    p.eventstudy = p.dir / "eventstudy.csv";
    p.eventstudy_svg = p.dir / "eventstudy.svg";
    return p;
}

fs::path summary_path(const RunConfig& config) { return config.output_dir / "summary.csv"; }

AuditResult audit_split_hygiene(const CityPaths& paths) {
    AuditResult r;
    std::set<raster::PatchId> test;
    {
        const auto t = csv::Table::read(paths.split);
        t.require_header({"row", "col", "split"});
        for (const auto& row : t.rows())
            if (labels::parse_split(row[2]) == labels::Split::Test)
                test.insert({static_cast<int>(csv::parse_int(row[0])), static_cast<int>(csv::parse_int(row[1]))});
    }
    for (const auto& file : {paths.train_samples, paths.forest_samples, paths.validation_split}) {
        if (!fs::exists(file)) throw InputError("audit input missing: " + file.string());
        const auto t = csv::Table::read(file);
        const auto rc = t.column("row"), cc = t.column("col");
        for (const auto& row : t.rows()) {
            ++r.rows_checked;
            if (test.count({static_cast<int>(csv::parse_int(row[rc])), static_cast<int>(csv::parse_int(row[cc]))}))
                ++r.test_rows_found;
        }
        r.files.push_back(file.filename().string());
    }
    r.passed = r.test_rows_found == 0;
    return r;
}

Pipeline::Pipeline(RunConfig config, bool resume, std::ostream& log)
    : cfg_(std::move(config)), resume_(resume), log_(log), lock_(cfg_.output_dir),
      manifest_(Manifest::load(cfg_.output_dir)) {
    cfg_.train.jobs = cfg_.jobs;
    cfg_.forest.jobs = cfg_.jobs;
    cfg_.validate();
    manifest_.set_config_hash(sha256_text(cfg_.canonical()));
}

const std::vector<std::string>& Pipeline::commands() {
    static const std::vector<std::string> names{"synth", "tile",   "label",    "split",      "train",   "scan",
                                                "smooth", "evaluate", "eventstudy", "report", "pipeline"};
    return names;
}

void Pipeline::run(const std::string& command) {
    if (command == "synth") return synth();
    if (command == "tile") return tile();
    if (command == "label") return label();
    if (command == "split") return split();
    if (command == "train") return train();
    if (command == "scan") return scan();
    if (command == "smooth") return smooth();
    if (command == "evaluate") return evaluate();
    if (command == "eventstudy") return eventstudy();
    if (command == "report") return report();
    if (command == "pipeline") return pipeline();
    throw ConfigError("unknown command '" + command + "'");
}

void Pipeline::stage(const std::string& name, const CityInputs& city, const std::vector<fs::path>& inputs,
                     const std::function<std::vector<fs::path>()>& body) {
    const std::string key = city.name + "/" + name;
    if (resume_ && manifest_.up_to_date(key, inputs)) {
        log_ << "[" << city.name << "] " << name << ": up to date, skipped\n";
        return;
    }
    for (const auto& p : inputs)
        if (!fs::exists(p))
            throw InputError("stage '" + name + "' for city " + city.name + " needs " + p.string() +
                             " (run the earlier stages first)");
    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    log_ << "[" << city.name << "] " << name << " ...\n" << std::flush;
    std::vector<fs::path> outputs;
    try {
        fs::create_directories(city_paths(cfg_, city).dir);
        outputs = body();
    } catch (const std::exception& e) {
        throw Error("stage '" + name + "' failed for city " + city.name + ": " + e.what());
    }
    manifest_.record(key, inputs, outputs, started);
    manifest_.save();
    log_ << "[" << city.name << "] " << name << ": done in " << seconds_since(t0) << " s\n" << std::flush;
}

std::vector<fs::path> Pipeline::raster_files(const CityInputs& city, bool pixels) const {
    std::vector<fs::path> out;
    for (const auto& h : raster::list_raster_dir(city.rasters)) {
        if (pixels) out.push_back(h.png_path);
        out.push_back(h.sidecar_path);
    }
    return out;
}

std::vector<fs::path> Pipeline::annotation_files(const CityInputs& city) const {
    if (!fs::is_directory(city.annotations)) return {city.annotations};
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(city.annotations))
        if (e.path().extension() == ".csv") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void Pipeline::synth() {
    for (const auto& city : cfg_.cities) {
        if (!city.synth) continue;
        stage("synth", city, {}, [&] {
            const auto& s = *city.synth;
            const auto model = synth::generate_city(s.city);
            std::vector<fs::path> outputs;
            fs::remove_all(city.rasters);
            fs::create_directories(city.rasters);
            const auto dates = synth::image_dates(s.render);
            synth::Renderer renderer(model, s.render);
            for (int d = 0; d < s.render.date_count; ++d) {
                const fs::path png = city.rasters / (dates[d].iso() + ".png");
                raster::write_raster(renderer.render(d), png);
                outputs.push_back(png);
                outputs.push_back(raster::sidecar_path_for(png));
            }
            const auto aois = synth::city_aois(model, s.no_analysis_share, cfg_.patch_size);
            fs::create_directories(city.aoi.parent_path());
            raster::write_aois(aois, city.aoi);
            outputs.push_back(city.aoi);

            fs::remove_all(city.annotations);
            fs::create_directories(city.annotations);
            const auto annotations = synth::emit_annotations(model, s.render);
            for (const auto& date : synth::annotation_dates(s.render)) {
                std::vector<labels::Annotation> at;
                for (const auto& a : annotations)
                    if (a.date == date) at.push_back(a);
                const fs::path file = city.annotations / (date.iso() + ".csv");
                labels::write_annotations(at, file);
                outputs.push_back(file);
            }
            event_study::write_events(synth::emit_events(model, s.render, s.decoy_share), city.events);
            outputs.push_back(city.events);

            // Ground truth over the same grid the tile stage will build.
            const raster::GeoRaster shape(model.width, model.height, 3,
                                          std::vector<std::uint8_t>(static_cast<std::size_t>(model.width) *
                                                                    model.height * 3),
                                          model.geo, dates[0], model.city_id);
            const auto grid = raster::build_grid(shape, aois, cfg_.patch_size);
            const std::vector<Date> post(dates.begin() + 1, dates.end());
            const auto truth = synth::ground_truth_panel(model, s.render, grid, post);
            const auto paths = city_paths(cfg_, city);
            labels::write_label_panel(truth, grid, paths.truth);
            outputs.push_back(paths.truth);
            return outputs;
        });
    }
}

void Pipeline::tile() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        const auto headers = raster::list_raster_dir(city.rasters);
        stage("tile", city, {headers.front().png_path, headers.front().sidecar_path, city.aoi}, [&] {
            const auto pre = raster::read_raster(headers.front().png_path);
            for (const auto& h : headers)
                if (!(h.geo == pre.geo()))
                    throw DimensionError(h.png_path.string() + " is not co-registered with the pre image");
            const auto aois = raster::read_aois(city.aoi);
            const auto grid = raster::build_grid(pre, aois, cfg_.patch_size);
            raster::write_grid_csv(grid, paths.grid);
            log_ << "[" << city.name << "] " << grid.size() << " patches, " << grid.no_analysis_count()
                 << " in no-analysis zones\n";
            return std::vector<fs::path>{paths.grid};
        });
    }
}

void Pipeline::label() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        auto inputs = raster_files(city, false);
        inputs.push_back(paths.grid);
        const auto ann_files = annotation_files(city);
        inputs.insert(inputs.end(), ann_files.begin(), ann_files.end());
        stage("label", city, inputs, [&] {
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const auto headers = raster::list_raster_dir(city.rasters);
            const auto images = post_dates(headers);
            std::vector<labels::Annotation> all;
            for (const auto& f : ann_files) {
                const auto a = labels::read_annotations(f);
                all.insert(all.end(), a.begin(), a.end());
            }
            std::vector<Date> ann_dates;
            for (const auto& a : all) ann_dates.push_back(a.date);
            std::sort(ann_dates.begin(), ann_dates.end());
            ann_dates.erase(std::unique(ann_dates.begin(), ann_dates.end()), ann_dates.end());

            labels::LabelPanel panel(grid.size(), ann_dates, images);
            for (std::size_t p = 0; p < grid.size(); ++p)
                for (std::size_t t = 0; t < images.size(); ++t) panel.set(p, t, labels::Label::Unknown);
            if (!ann_dates.empty() && !images.empty()) {
                const auto bound = labels::bind_annotation_dates(ann_dates, images, cfg_.date_binding);
                const int w = grid.cols() * grid.patch_size(), h = grid.rows() * grid.patch_size();
                std::vector<labels::AnnotationSnapshot> snaps;
                for (std::size_t k = 0; k < ann_dates.size(); ++k) {
                    std::vector<labels::Annotation> at;
                    for (const auto& a : all)
                        if (a.date == ann_dates[k]) at.push_back(a);
                    snaps.push_back({bound[k], labels::label_at_annotation_date(grid, headers.front().geo, w, h, at,
                                                                                ann_dates[k], ann_dates)});
                }
                panel = labels::propagate(snaps, images);
            }
            labels::write_label_panel(panel, grid, paths.labels);
            log_ << "[" << city.name << "] labels: " << panel.count(labels::Label::Intact) << " intact, "
                 << panel.count(labels::Label::Destroyed) << " destroyed, " << panel.count(labels::Label::Unknown)
                 << " unknown\n";
            return std::vector<fs::path>{paths.labels};
        });
    }
}

void Pipeline::split() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        stage("split", city, {paths.grid}, [&] {
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const std::vector<raster::PatchId> patches(grid.included().begin(), grid.included().end());
            const auto s = labels::split_patches(patches, cfg_.split_fraction, cfg_.split_seed);
            labels::write_split(s, paths.split);

            std::vector<raster::PatchId> train;
            for (const auto& id : patches)
                if (s.of(id) == labels::Split::Train) train.push_back(id);
            // Fit/validation sub-split of the Train patches; Test never enters.
            const auto sub = labels::split_patches(train, 1.0 - cfg_.validation_fraction,
                                                   derive_seed(cfg_.split_seed, 0x5a1d));
            csv::Writer w(paths.validation_split, {"row", "col", "role"});
            for (const auto& id : train) {
                w.field(id.row).field(id.col).field(sub.of(id) == labels::Split::Train ? "fit" : "validation");
                w.end_row();
            }
            w.close();
            return std::vector<fs::path>{paths.split, paths.validation_split};
        });
    }
}

void Pipeline::train() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        if (!has_labels(paths)) {
            log_ << "[" << city.name << "] train: no labeled samples, skipped\n";
            continue;
        }
        auto inputs = raster_files(city, true);
        inputs.insert(inputs.end(), {paths.grid, paths.labels, paths.split, paths.validation_split});
        stage("train", city, inputs, [&] {
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const auto labels = labels::read_label_panel(paths.labels, grid, {});
            const auto split = labels::read_split(paths.split, cfg_.split_fraction, cfg_.split_seed);
            const auto roles = read_roles(paths.validation_split);
            const auto headers = raster::list_raster_dir(city.rasters);
            const auto images = post_dates(headers);
            if (labels.image_dates() != images) throw DimensionError("label panel dates differ from the rasters");

            std::vector<Cell> fit_pos, fit_neg, val;
            for (std::size_t p = 0; p < grid.size(); ++p) {
                const auto id = grid.patch(p);
                if (grid.is_no_analysis(p) || split.of(id) != labels::Split::Train) continue;
                const auto role = roles.at(id);
                for (std::size_t t = 0; t < images.size(); ++t) {
                    const auto l = labels.at(p, t);
                    if (l == labels::Label::Unknown) continue;
                    const Cell c{p, t, l == labels::Label::Destroyed};
                    if (role == Role::Validation)
                        val.push_back(c);
                    else
                        (c.destroyed ? fit_pos : fit_neg).push_back(c);
                }
            }
            fit_pos = sample_cells(std::move(fit_pos), cfg_.max_positives, derive_seed(cfg_.train.seed, 0xb05));
            fit_neg = sample_cells(std::move(fit_neg), cfg_.max_negatives, derive_seed(cfg_.train.seed, 0xe9));
            val = sample_cells(std::move(val), cfg_.max_validation, derive_seed(cfg_.train.seed, 0x7a1));
            std::vector<Cell> fit = fit_pos;
            fit.insert(fit.end(), fit_neg.begin(), fit_neg.end());
            std::sort(fit.begin(), fit.end(),
                      [](const Cell& a, const Cell& b) { return std::tie(a.date, a.patch) < std::tie(b.date, b.patch); });

            // Crops, one raster at a time.
            std::vector<raster::PatchSample> fit_samples(fit.size()), val_samples(val.size());
            {
                const auto pre = raster::read_raster(headers.front().png_path);
                std::size_t i = 0, j = 0;
                for (std::size_t t = 0; t < images.size(); ++t) {
                    const bool needed = (i < fit.size() && fit[i].date == t) || (j < val.size() && val[j].date == t);
                    if (!needed) continue;
                    const auto post = raster::read_raster(headers[t + 1].png_path);
                    for (; i < fit.size() && fit[i].date == t; ++i)
                        fit_samples[i] = raster::extract_sample(pre, post, grid, grid.patch(fit[i].patch));
                    for (; j < val.size() && val[j].date == t; ++j)
                        val_samples[j] = raster::extract_sample(pre, post, grid, grid.patch(val[j].patch));
                }
            }

            std::vector<labels::Label> fit_labels;
            for (const auto& c : fit) fit_labels.push_back(c.destroyed ? labels::Label::Destroyed : labels::Label::Intact);
            std::vector<nn::Example> train_set, val_set;
            for (auto k : labels::balance_indices(fit_labels)) train_set.push_back({&fit_samples[k], fit[k].destroyed});
            for (std::size_t k = 0; k < val.size(); ++k) val_set.push_back({&val_samples[k], val[k].destroyed});

            csv::Writer ts(paths.train_samples, {"row", "col", "date", "label", "role"});
            for (const auto& [cells, role] : {std::pair{&fit, "fit"}, std::pair{&val, "validation"}})
                for (const auto& c : *cells) {
                    const auto id = grid.patch(c.patch);
                    ts.field(id.row).field(id.col).field(images[c.date].iso()).field(c.destroyed ? "destroyed" : "intact").field(role);
                    ts.end_row();
                }
            ts.close();
            log_ << "[" << city.name << "] training on " << train_set.size() << " balanced samples (" << fit_pos.size()
                 << " destroyed, " << fit_neg.size() << " intact), validating on " << val_set.size() << "\n"
                 << std::flush;

            std::vector<fs::path> outputs{paths.train_samples};
            nn::NetworkSpec spec = cfg_.net;
            nn::TrainResult result;
            if (cfg_.hyperparameter_search) {
                auto grid_c = nn::default_search_grid(cfg_.train, cfg_.net.base_filters);
                for (auto& c : grid_c) c.spec.input_size = cfg_.patch_size;
                auto found = nn::hyperparameter_search(grid_c, train_set, val_set);
                csv::Writer sw(paths.search, {"candidate", "spec", "val_auc"});
                for (std::size_t k = 0; k < grid_c.size(); ++k) {
                    sw.field(k).field(grid_c[k].spec.canonical()).field(found.val_aucs[k]);
                    sw.end_row();
                }
                sw.close();
                outputs.push_back(paths.search);
                spec = grid_c[found.best_index].spec;
                result = std::move(found.best);
            } else {
                result = nn::train(spec, cfg_.train, train_set, val_set);
            }
            nn::save_model({spec, result.params}, paths.model);
            nn::write_history_csv(result.history, paths.history);
            for (const auto& h : result.history)
                log_ << "[" << city.name << "]   epoch " << h.epoch << " loss " << h.loss << " val_auc " << h.val_auc
                     << "\n";
            outputs.push_back(paths.model);
            outputs.push_back(paths.history);
            return outputs;
        });
    }
}

void Pipeline::scan() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        if (!has_labels(paths)) {
            log_ << "[" << city.name << "] scan: no labeled samples, skipped\n";
            continue;
        }
        auto inputs = raster_files(city, true);
        inputs.insert(inputs.end(), {paths.grid, paths.model});
        stage("scan", city, inputs, [&] {
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const auto model = nn::load_model(paths.model);
            const auto headers = raster::list_raster_dir(city.rasters);
            const auto images = post_dates(headers);
            const auto pre = raster::read_raster(headers.front().png_path);
            std::map<Date, fs::path> by_date;
            for (const auto& h : headers) by_date[h.capture_date] = h.png_path;
            const auto panel = nn::dense_scan(
                model.spec, model.params, grid, pre, images,
                [&](const Date& d) -> std::optional<raster::GeoRaster> {
                    const auto it = by_date.find(d);
                    if (it == by_date.end()) return std::nullopt;
                    return raster::read_raster(it->second);
                },
                cfg_.jobs);
            smoother::write_stage1_csv(panel, paths.stage1);
            return std::vector<fs::path>{paths.stage1};
        });
    }
}

void Pipeline::smooth() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        if (!has_labels(paths)) {
            log_ << "[" << city.name << "] smooth: no labeled samples, skipped\n";
            continue;
        }
        stage("smooth", city, {paths.grid, paths.labels, paths.split, paths.stage1}, [&] {
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const auto labels = labels::read_label_panel(paths.labels, grid, {});
            const auto split = labels::read_split(paths.split, cfg_.split_fraction, cfg_.split_seed);
            auto panel = smoother::read_panel_csv(paths.stage1, grid);
            if (labels.image_dates() != panel.dates()) throw DimensionError("label and score panels differ in dates");

            const auto x = smoother::build_feature_matrix(panel, grid, cfg_.features, cfg_.jobs);
            const std::size_t T = panel.date_count();
            std::vector<Cell> cells;
            for (std::size_t p = 0; p < grid.size(); ++p) {
                if (grid.is_no_analysis(p) || split.of(grid.patch(p)) != labels::Split::Train) continue;
                for (std::size_t t = 0; t < T; ++t) {
                    const auto l = labels.at(p, t);
                    if (l != labels::Label::Unknown) cells.push_back({p, t, l == labels::Label::Destroyed});
                }
            }
            cells = sample_cells(std::move(cells), cfg_.forest_max_rows, derive_seed(cfg_.forest.seed, 0x5e1));
            std::sort(cells.begin(), cells.end(),
                      [](const Cell& a, const Cell& b) { return std::tie(a.patch, a.date) < std::tie(b.patch, b.date); });
            std::vector<std::size_t> rows;
            std::vector<std::uint8_t> y;
            csv::Writer fs_out(paths.forest_samples, {"row", "col", "date", "label"});
            for (const auto& c : cells) {
                rows.push_back(c.patch * T + c.date);
                y.push_back(c.destroyed ? 1 : 0);
                const auto id = grid.patch(c.patch);
                fs_out.field(id.row).field(id.col).field(panel.dates()[c.date].iso()).field(c.destroyed ? "destroyed" : "intact");
                fs_out.end_row();
            }
            fs_out.close();

            const auto fit = smoother::train_forest(smoother::select_rows(x, rows), y, cfg_.forest);
            const auto cal = smoother::calibrate_cutoff(fit.oob_scores, y, cfg_.target_recall);
            smoother::smooth_panel(panel, grid, fit.model, cal, cfg_.features, cfg_.jobs);
            smoother::save_forest(fit.model, paths.forest);
            smoother::write_smoothed_csv(panel, paths.smoothed);

            ordered_json j;
            j["threshold"] = cal.threshold;
            j["achieved_train_recall"] = cal.achieved_train_recall;
            j["target_recall"] = cfg_.target_recall;
            j["score_source"] = "out_of_bag";
            j["n_train"] = y.size();
            j["positives"] = std::count(y.begin(), y.end(), 1);
            write_json(j, paths.calibration);
            log_ << "[" << city.name << "] forest on " << y.size() << " rows; cutoff " << cal.threshold
                 << " reaches training recall " << cal.achieved_train_recall << "\n";
            return std::vector<fs::path>{paths.forest_samples, paths.forest, paths.calibration, paths.smoothed};
        });
    }
}

void Pipeline::evaluate() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        if (!has_labels(paths)) {
            log_ << "[" << city.name << "] evaluate: no labeled samples, skipped\n";
            continue;
        }
        stage("evaluate", city,
              {paths.grid, paths.labels, paths.split, paths.smoothed, paths.train_samples, paths.forest_samples,
               paths.validation_split},
              [&] {
                  const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
                  const auto labels = labels::read_label_panel(paths.labels, grid, {});
                  const auto split = labels::read_split(paths.split, cfg_.split_fraction, cfg_.split_seed);
                  const auto panel = smoother::read_panel_csv(paths.smoothed, grid);
                  const auto report = evaluation::evaluate_run(panel, labels, split);
                  evaluation::write_report_json(report.stage1, city.name, 1, paths.report_stage1);
                  evaluation::write_pr_csv(report.stage1.pr_unbalanced, paths.pr_stage1);
                  evaluation::write_pr_csv(report.stage1.pr_balanced, paths.pr_stage1_balanced);
                  std::vector<fs::path> outputs{paths.report_stage1, paths.pr_stage1, paths.pr_stage1_balanced};
                  std::vector<NamedCurve> curves{{"stage 1, unbalanced", &report.stage1.pr_unbalanced},
                                                 {"stage 1, balanced", &report.stage1.pr_balanced}};
                  if (report.stage2) {
                      evaluation::write_report_json(*report.stage2, city.name, 2, paths.report_stage2);
                      evaluation::write_pr_csv(report.stage2->pr_unbalanced, paths.pr_stage2);
                      evaluation::write_pr_csv(report.stage2->pr_balanced, paths.pr_stage2_balanced);
                      outputs.insert(outputs.end(), {paths.report_stage2, paths.pr_stage2, paths.pr_stage2_balanced});
                      curves.push_back({"stage 2, unbalanced", &report.stage2->pr_unbalanced});
                      curves.push_back({"stage 2, balanced", &report.stage2->pr_balanced});
                  }
                  write_pr_svg(curves, city.name + ": precision-recall, Test split", paths.pr_svg);
                  outputs.push_back(paths.pr_svg);

                  const auto audit = audit_split_hygiene(paths);
                  ordered_json j;
                  j["city"] = city.name;
                  j["passed"] = audit.passed;
                  j["rows_checked"] = audit.rows_checked;
                  j["test_rows_found"] = audit.test_rows_found;
                  j["files"] = audit.files;
                  write_json(j, paths.audit);
                  outputs.push_back(paths.audit);
                  log_ << "[" << city.name << "] stage 1 AUC " << report.stage1.auc << ", AP " << report.stage1.ap_unbalanced;
                  if (report.stage2)
                      log_ << "; stage 2 AUC " << report.stage2->auc << ", AP " << report.stage2->ap_unbalanced;
                  log_ << "; split audit " << (audit.passed ? "passed" : "FAILED") << "\n";
                  if (!audit.passed)
                      throw StateError("split audit found " + std::to_string(audit.test_rows_found) +
                                       " Test-split rows among training inputs");
                  return outputs;
              });
    }
}

void Pipeline::eventstudy() {
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        if (!has_labels(paths)) {
            log_ << "[" << city.name << "] eventstudy: no labeled samples, skipped\n";
            continue;
        }
        if (city.events.empty() || !fs::exists(city.events)) {
            log_ << "[" << city.name << "] eventstudy: no event file, skipped\n";
            continue;
        }
        const auto headers = raster::list_raster_dir(city.rasters);
        stage("eventstudy", city, {paths.grid, paths.smoothed, city.events, headers.front().sidecar_path}, [&] {
            const auto events = event_study::read_events(city.events);
            if (events.empty()) throw InputError("event file " + city.events.string() + " has no events");
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const auto panel = smoother::read_panel_csv(paths.smoothed, grid);
            const int w = grid.cols() * grid.patch_size(), h = grid.rows() * grid.patch_size();
            const auto mapping =
                event_study::map_events(events, grid, headers.front().geo, w, h, panel.dates());
            const auto design = event_study::build_design(panel, mapping);
            const auto result = event_study::estimate(design);
            event_study::write_coefficients_csv(result, paths.eventstudy);
            write_event_study_svg(result, city.name + ": event study", paths.eventstudy_svg);
            ordered_json j;
            j["events"] = events.size();
            j["mapped"] = mapping.mapped;
            j["dropped_outside"] = mapping.dropped_outside;
            j["dropped_date"] = mapping.dropped_date;
            std::size_t treated = 0;
            for (const auto& e : mapping.event_index) treated += e ? 1 : 0;
            j["treated_patches"] = treated;
            j["n_obs"] = result.n_obs;
            write_json(j, paths.event_mapping);
            return std::vector<fs::path>{paths.eventstudy, paths.eventstudy_svg, paths.event_mapping};
        });
    }
}

void Pipeline::report() {
    std::vector<fs::path> inputs;
    for (const auto& city : cfg_.cities) {
        const auto paths = city_paths(cfg_, city);
        std::vector<std::pair<const char*, fs::path>> needed{{"tile", paths.grid}, {"label", paths.labels}};
        if (has_labels(paths)) needed.insert(needed.end(), {{"smooth", paths.smoothed}, {"evaluate", paths.report_stage1}});
        std::string missing;
        for (const auto& [stage_name, file] : needed) {
            if (fs::exists(file)) {
                inputs.push_back(file);
                continue;
            }
            missing += (missing.empty() ? "" : ", ") + std::string(stage_name);
        }
        if (!missing.empty())
            throw InputError("report: city " + city.name + " is missing output of stage(s): " + missing);
        if (fs::exists(paths.report_stage2)) inputs.push_back(paths.report_stage2);
    }
    CityInputs all;
    all.name = "_run";
    stage("report", all, inputs, [&] {
        csv::Writer w(summary_path(cfg_), kSummaryHeader);
        for (const auto& city : cfg_.cities) {
            const auto paths = city_paths(cfg_, city);
            const auto grid = raster::read_grid_csv(paths.grid, cfg_.patch_size);
            const auto labels = labels::read_label_panel(paths.labels, grid, {});
            SummaryRow row;
            row.city = city.name;
            row.dates = labels.image_dates().size();
            row.total_samples = labels.patch_count() * row.dates;
            const auto destroyed = labels.count(labels::Label::Destroyed);
            row.labeled_samples = destroyed + labels.count(labels::Label::Intact);
            row.share_destroyed = row.labeled_samples ? static_cast<double>(destroyed) / row.labeled_samples : 0.0;
            w.field(row.city).field(row.total_samples).field(row.dates).field(row.labeled_samples)
                .field(row.share_destroyed);
            if (row.labeled_samples == 0) {
                w.field("").field("").field("").field(std::size_t{0});
                w.end_row();
                continue;
            }
            const auto rep = read_json(fs::exists(paths.report_stage2) ? paths.report_stage2 : paths.report_stage1);
            row.auc = rep.at("auc").get<double>();
            row.ap_balanced = rep.at("ap_balanced").get<double>();
            row.ap_unbalanced = rep.at("ap_unbalanced").get<double>();
            const auto panel = smoother::read_panel_csv(paths.smoothed, grid);
            if (panel.date_count() && panel.has_stage2())
                for (std::size_t p = 0; p < panel.patch_count(); ++p)
                    row.destroyed_final += *panel.binary(p, panel.date_count() - 1) == 1 ? 1 : 0;
            w.field(row.auc).field(row.ap_balanced).field(row.ap_unbalanced).field(row.destroyed_final);
            w.end_row();
        }
        w.close();
        return std::vector<fs::path>{summary_path(cfg_)};
    });
}

void Pipeline::pipeline() {
    synth();
    tile();
    label();
    split();
    train();
    scan();
    smooth();
    evaluate();
    eventstudy();
    report();
}

}  // namespace destrack::pipeline
