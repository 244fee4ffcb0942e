#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"
#include "destrack/labels/io.hpp"
#include "destrack/pipeline/config.hpp"
#include "destrack/pipeline/manifest.hpp"
#include "destrack/pipeline/stages.hpp"
#include "destrack/raster/io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace destrack;
using namespace destrack::pipeline;

namespace {

// Small and fast: 8x8 patches, 8 dates, a two-block net.
std::string city(const std::string& name, const std::string& extra = "") {
    return "[city " + name +
           "]\n"
           "synth.width = 512\n"
           "synth.height = 512\n"
           "synth.destruction_share = 0.1\n" +
           (extra.find("synth.date_count") == std::string::npos ? "synth.date_count = 8\n" : "") + extra;
}

std::string small_config(const fs::path& out, const std::string& cities = city("a")) {
    return "output_dir = " + out.string() +
           "\n"
           "net.num_conv_blocks = 2\n"
           "net.base_filters = 2\n"
           "net.fc_units = 8\n"
           "net.pool_stride = 4\n"
           "train.epochs = 2\n"
           "train.max_negatives = 400\n"
           "train.max_positives = 200\n"
           "forest.num_trees = 10\n" +
           cities;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig parse(const std::string& text) { return parse_config(text, fs::current_path()); }

}  // namespace

TEST_CASE("config parsing") {
    const auto dir = test_support::scratch_dir("config");
    const auto cfg = parse(small_config(dir / "run", city("a") + city("b", "synth.seed = 9\n")));
    REQUIRE(cfg.cities.size() == 2);
    CHECK(cfg.cities[1].synth->city.seed == 9);
    CHECK(cfg.net.input_size == cfg.patch_size);
    CHECK(cfg.cities[0].synth->render.date_count == 8);
    CHECK(cfg.canonical() == parse(small_config(dir / "run", city("a") + city("b", "synth.seed = 9\n"))).canonical());
    CHECK(cfg.canonical() != parse(small_config(dir / "run", city("a") + city("b", "synth.seed = 8\n"))).canonical());

    CHECK_THROWS_AS(parse("bogus = 1\n[city a]\n"), ConfigError);
    CHECK_THROWS_AS(parse("jobs = 2\njobs = 3\n[city a]\n"), ConfigError);
    CHECK_THROWS_AS(parse("jobs = two\n[city a]\n"), ConfigError);
    CHECK_THROWS_AS(parse("[city a]\n[city a]\n"), ConfigError);
    CHECK_THROWS_AS(parse("jobs = 1\n").validate(), ConfigError);
    try {
        parse("jobs = 1\n\nnot_a_key = 3\n[city a]\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    auto over = cfg;
    apply_seed_override(over, 77);
    CHECK(over.split_seed != cfg.split_seed);
    CHECK(over.canonical() != cfg.canonical());

    CHECK(default_annotation_indices(22) == std::vector<int>{5, 11, 16, 21});
    CHECK(default_annotation_indices(8) == std::vector<int>{2, 4, 5, 7});
}

TEST_CASE("manifest and lock") {
    const auto dir = test_support::scratch_dir("manifest");
    {
        std::ofstream(dir / "in.txt") << "abc";
        std::ofstream(dir / "out.txt") << "x";
    }
    CHECK(sha256_text("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_file(dir / "in.txt") == sha256_text("abc"));
    CHECK_THROWS_AS(sha256_file(dir / "none.txt"), InputError);

    Manifest m(dir);
    m.set_config_hash("h1");
    m.record("s", {dir / "in.txt"}, {dir / "out.txt"}, utc_now());
    CHECK(m.up_to_date("s", {dir / "in.txt"}));
    CHECK_FALSE(m.up_to_date("t", {dir / "in.txt"}));
    CHECK_FALSE(m.up_to_date("s", {}));
    m.save();
    auto back = Manifest::load(dir);
    CHECK(back.config_hash() == "h1");
    CHECK(back.up_to_date("s", {dir / "in.txt"}));
    CHECK(back.stages().at("s").inputs.count("in.txt") == 1);

    std::ofstream(dir / "out.txt") << "changed";
    CHECK_FALSE(back.up_to_date("s", {dir / "in.txt"}));
    back.set_config_hash("h1");
    CHECK_FALSE(back.stages().empty());
    back.set_config_hash("h2");
    CHECK(back.stages().empty());

    {
        RunLock a(dir);
        CHECK_THROWS_AS(RunLock{dir}, StateError);
    }
    CHECK_NOTHROW(RunLock{dir});
}

TEST_CASE("small synthetic pipeline end to end") {
    const auto dir = test_support::scratch_dir("pipeline");
    const auto two = city("a") + city("b", "synth.seed = 4\n");
    auto cfg = parse(small_config(dir / "run", two));
    std::ostringstream log;
    {
        Pipeline p(cfg, false, log);
        p.pipeline();
    }
    const auto pa = city_paths(cfg, cfg.cities[0]);
    for (const auto& f : {pa.grid, pa.labels, pa.split, pa.model, pa.stage1, pa.forest, pa.calibration, pa.smoothed,
                          pa.report_stage1, pa.report_stage2, pa.audit, pa.eventstudy, pa.pr_svg})
        CHECK_MESSAGE(fs::exists(f), f.string());
    CHECK_FALSE(fs::exists(dir / "run" / ".lock"));

    const auto summary = csv::Table::read(summary_path(cfg));
    CHECK(summary.header() == kSummaryHeader);
    REQUIRE(summary.size() == 2);
    CHECK(summary.rows()[0][0] == "a");
    CHECK(summary.rows()[1][0] == "b");

    // Labels agree with the truth wherever they are known, and the summary share follows them.
    const auto grid = raster::read_grid_csv(pa.grid);
    const auto lab = labels::read_label_panel(pa.labels, grid, {});
    const auto truth = labels::read_label_panel(pa.truth, grid, {});
    std::size_t destroyed = 0, known = 0;
    for (std::size_t p = 0; p < grid.size(); ++p)
        for (std::size_t t = 0; t < lab.image_dates().size(); ++t) {
            if (lab.at(p, t) == labels::Label::Unknown) continue;
            ++known;
            destroyed += lab.at(p, t) == labels::Label::Destroyed;
            CHECK(lab.at(p, t) == truth.at(p, t));
        }
    const auto& row = summary.rows()[0];
    CHECK(std::stoul(row[summary.column("labeled_samples")]) == known);
    CHECK(csv::parse_double(row[summary.column("share_destroyed")]) ==
          doctest::Approx(static_cast<double>(destroyed) / known).epsilon(1e-9));
    CHECK(audit_split_hygiene(pa).passed);

    // Resume re-runs only what lost an output.
    const auto stage1_bytes = slurp(pa.stage1);
    const auto model_time = fs::last_write_time(pa.model);
    fs::remove(pa.stage1);
    std::ostringstream log2;
    {
        Pipeline p(cfg, true, log2);
        p.pipeline();
    }
    const auto text = log2.str();
    CHECK(text.find("[a] train: up to date, skipped") != std::string::npos);
    CHECK(text.find("[a] scan ...") != std::string::npos);
    CHECK(text.find("[b] scan: up to date, skipped") != std::string::npos);
    CHECK(slurp(pa.stage1) == stage1_bytes);
    CHECK(fs::last_write_time(pa.model) == model_time);

    // Same config, fresh directory: identical bytes.
    const auto cfg2 = parse(small_config(dir / "run2", two));
    {
        std::ostringstream quiet;
        Pipeline p(cfg2, false, quiet);
        p.pipeline();
    }
    const auto pb = city_paths(cfg2, cfg2.cities[0]);
    for (auto member : {&CityPaths::labels, &CityPaths::stage1, &CityPaths::smoothed, &CityPaths::report_stage2,
                        &CityPaths::eventstudy, &CityPaths::forest, &CityPaths::model})
        CHECK_MESSAGE(slurp(pa.*member) == slurp(pb.*member), (pa.*member).filename().string());
    CHECK(slurp(summary_path(cfg)) == slurp(summary_path(cfg2)));
}

TEST_CASE("stage errors") {
    const auto dir = test_support::scratch_dir("stage_errors");
    auto cfg = parse(small_config(dir / "run"));
    std::ostringstream log;
    Pipeline p(cfg, false, log);
    CHECK_THROWS_AS(p.run("fly"), ConfigError);
    try {
        p.scan();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("not found") != std::string::npos);
    }
    p.run("synth");
    try {
        p.label();
        FAIL("expected an error");
    } catch (const Error& e) {
        INFO(std::string(e.what()));
        CHECK(std::string(e.what()).find("run the earlier stages first") != std::string::npos);
    }
    CHECK_THROWS_AS(Pipeline(cfg, false, log), StateError);
}

TEST_CASE("single date city and empty event file") {
    const auto dir = test_support::scratch_dir("single_date");
    auto cfg = parse(small_config(dir / "run", city("one", "synth.date_count = 1\n")));
    {
        std::ostringstream log;
        Pipeline p(cfg, false, log);
        p.pipeline();
    }
    const auto pa = city_paths(cfg, cfg.cities[0]);
    std::size_t pngs = 0;
    for (const auto& e : fs::directory_iterator(cfg.cities[0].rasters)) pngs += e.path().extension() == ".png";
    CHECK(pngs == 1);
    const auto summary = csv::Table::read(summary_path(cfg));
    REQUIRE(summary.size() == 1);
    CHECK(summary.rows()[0][summary.column("labeled_samples")] == "0");
    CHECK(summary.rows()[0][summary.column("auc")].empty());

    // An events file with only a header is an error that names it.
    const auto cfg_text = small_config(dir / "run_ev");
    auto ev_cfg = parse(cfg_text);
    {
        std::ostringstream log;
        Pipeline p(ev_cfg, false, log);
        for (const auto* stage : {"synth", "tile", "label", "split", "train", "scan", "smooth"}) p.run(stage);
    }
    const auto events = ev_cfg.cities[0].events;
    std::ofstream(events) << "lon,lat,date,event_type\n";
    std::ostringstream log;
    Pipeline p(ev_cfg, false, log);
    try {
        p.eventstudy();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find(events.filename().string()) != std::string::npos);
        CHECK(std::string(e.what()).find("no events") != std::string::npos);
    }
}

TEST_CASE("command line exit codes") {
    const char* cli = std::getenv("DESTRACK_CLI");
    if (!cli) return;
    const auto dir = test_support::scratch_dir("cli");
    std::ofstream(dir / "bad.cfg") << "bogus = 1\n[city a]\n";
    const auto run = [&](const std::string& args) {
        const int rc = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    };
    CHECK(run("tile --config " + (dir / "bad.cfg").string()) == 2);
    CHECK(run("--help") == 0);
    CHECK(run("nosuch") != 0);
    std::ofstream(dir / "ok.cfg") << small_config(dir / "run");
    CHECK(run("scan --config " + (dir / "ok.cfg").string()) == 1);
}
