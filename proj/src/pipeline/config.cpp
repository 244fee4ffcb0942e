#include "destrack/pipeline/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"

namespace destrack::pipeline {

namespace fs = std::filesystem;

namespace {

struct Value {
    std::string text;
    int line;
    const fs::path* base;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("line " + std::to_string(line) + ": " + what + " ('" + text + "')");
    }
    double real() const {
        try {
            return csv::parse_double(text);
        } catch (const Error&) {
            fail("expected a number");
        }
    }
    long long integer() const {
        try {
            return csv::parse_int(text);
        } catch (const Error&) {
            fail("expected an integer");
        }
    }
    int int32() const {
        const auto v = integer();
        if (v < -2147483647LL || v > 2147483647LL) fail("integer out of range");
        return static_cast<int>(v);
    }
    std::size_t count() const {
        const auto v = integer();
        if (v < 0) fail("expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    std::uint64_t seed() const {
        const auto v = integer();
        if (v < 0) fail("seeds must be non-negative");
        return static_cast<std::uint64_t>(v);
    }
    bool flag() const {
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        fail("expected true or false");
    }
    fs::path path() const {
        fs::path p(text);
        return p.is_absolute() ? p : (*base / p).lexically_normal();
    }
    std::vector<int> int_list() const {
        std::vector<int> out;
        if (csv::trim(text).empty()) return out;
        for (const auto& part : csv::split(text, ',')) {
            try {
                out.push_back(static_cast<int>(csv::parse_int(csv::trim(part))));
            } catch (const Error&) {
                fail("expected a comma-separated integer list");
            }
        }
        return out;
    }
};

using GlobalSetter = std::function<void(RunConfig&, const Value&)>;
using CitySetter = std::function<void(CityInputs&, const Value&)>;

SynthSettings& synth_of(CityInputs& c) {
    if (!c.synth) {
        c.synth.emplace();
        c.synth->city.city_id = c.name;
    }
    return *c.synth;
}

const std::map<std::string, GlobalSetter>& global_keys() {
    static const std::map<std::string, GlobalSetter> keys{
        {"output_dir", [](RunConfig& c, const Value& v) { c.output_dir = v.path(); }},
        {"jobs", [](RunConfig& c, const Value& v) { c.jobs = v.int32(); }},
        {"patch_size", [](RunConfig& c, const Value& v) { c.patch_size = v.int32(); }},
        {"labels.date_binding",
         [](RunConfig& c, const Value& v) {
             if (v.text == "exact")
                 c.date_binding = labels::DateBinding::Exact;
             else if (v.text == "nearest")
                 c.date_binding = labels::DateBinding::Nearest;
             else
                 v.fail("expected exact or nearest");
         }},
        {"split.fraction", [](RunConfig& c, const Value& v) { c.split_fraction = v.real(); }},
        {"split.seed", [](RunConfig& c, const Value& v) { c.split_seed = v.seed(); }},
        {"split.validation_fraction", [](RunConfig& c, const Value& v) { c.validation_fraction = v.real(); }},
        {"net.num_conv_blocks", [](RunConfig& c, const Value& v) { c.net.num_conv_blocks = v.int32(); }},
        {"net.kernel_size", [](RunConfig& c, const Value& v) { c.net.kernel_size = v.int32(); }},
        {"net.pool_stride", [](RunConfig& c, const Value& v) { c.net.pool_stride = v.int32(); }},
        {"net.dropout_prob", [](RunConfig& c, const Value& v) { c.net.dropout_prob = v.real(); }},
        {"net.fc_units", [](RunConfig& c, const Value& v) { c.net.fc_units = v.int32(); }},
        {"net.fc_activation",
         [](RunConfig& c, const Value& v) {
             try {
                 c.net.fc_activation = nn::parse_activation(v.text);
             } catch (const ConfigError&) {
                 v.fail("expected relu or sigmoid");
             }
         }},
        {"net.base_filters", [](RunConfig& c, const Value& v) { c.net.base_filters = v.int32(); }},
        {"train.learning_rate", [](RunConfig& c, const Value& v) { c.train.learning_rate = v.real(); }},
        {"train.batch_size", [](RunConfig& c, const Value& v) { c.train.batch_size = v.int32(); }},
        {"train.epochs", [](RunConfig& c, const Value& v) { c.train.epochs = v.int32(); }},
        {"train.seed", [](RunConfig& c, const Value& v) { c.train.seed = v.seed(); }},
        {"train.weight_init_scale", [](RunConfig& c, const Value& v) { c.train.weight_init_scale = v.real(); }},
        {"train.search", [](RunConfig& c, const Value& v) { c.hyperparameter_search = v.flag(); }},
        {"train.max_positives", [](RunConfig& c, const Value& v) { c.max_positives = v.count(); }},
        {"train.max_negatives", [](RunConfig& c, const Value& v) { c.max_negatives = v.count(); }},
        {"train.max_validation", [](RunConfig& c, const Value& v) { c.max_validation = v.count(); }},
        {"forest.num_trees", [](RunConfig& c, const Value& v) { c.forest.num_trees = v.int32(); }},
        {"forest.max_depth", [](RunConfig& c, const Value& v) { c.forest.max_depth = v.int32(); }},
        {"forest.min_leaf", [](RunConfig& c, const Value& v) { c.forest.min_leaf = v.int32(); }},
        {"forest.features_per_split", [](RunConfig& c, const Value& v) { c.forest.features_per_split = v.int32(); }},
        {"forest.seed", [](RunConfig& c, const Value& v) { c.forest.seed = v.seed(); }},
        {"forest.include_leads", [](RunConfig& c, const Value& v) { c.features.include_leads = v.flag(); }},
        {"forest.max_rows", [](RunConfig& c, const Value& v) { c.forest_max_rows = v.count(); }},
        {"smooth.target_recall", [](RunConfig& c, const Value& v) { c.target_recall = v.real(); }},
    };
    return keys;
}

const std::map<std::string, CitySetter>& city_keys() {
    static const std::map<std::string, CitySetter> keys{
        {"rasters", [](CityInputs& c, const Value& v) { c.rasters = v.path(); }},
        {"aoi", [](CityInputs& c, const Value& v) { c.aoi = v.path(); }},
        {"annotations", [](CityInputs& c, const Value& v) { c.annotations = v.path(); }},
        {"events", [](CityInputs& c, const Value& v) { c.events = v.path(); }},
        {"synth.width", [](CityInputs& c, const Value& v) { synth_of(c).city.width = v.int32(); }},
        {"synth.height", [](CityInputs& c, const Value& v) { synth_of(c).city.height = v.int32(); }},
        {"synth.building_density", [](CityInputs& c, const Value& v) { synth_of(c).city.building_density = v.real(); }},
        {"synth.destruction_share",
         [](CityInputs& c, const Value& v) { synth_of(c).city.destruction_share = v.real(); }},
        {"synth.seed", [](CityInputs& c, const Value& v) { synth_of(c).city.seed = v.seed(); }},
        {"synth.date_count",
         [](CityInputs& c, const Value& v) {
             auto& s = synth_of(c);
             s.city.date_count = v.int32();
             s.render.date_count = s.city.date_count;
         }},
        {"synth.annotation_indices",
         [](CityInputs& c, const Value& v) { synth_of(c).render.annotation_date_indices = v.int_list(); }},
        {"synth.illumination_shift",
         [](CityInputs& c, const Value& v) { synth_of(c).render.illumination_shift = v.real(); }},
        {"synth.clutter_density",
         [](CityInputs& c, const Value& v) { synth_of(c).render.clutter_density = v.real(); }},
        {"synth.noise_sigma", [](CityInputs& c, const Value& v) { synth_of(c).render.noise_sigma = v.real(); }},
        {"synth.park_share", [](CityInputs& c, const Value& v) { synth_of(c).city.park_share = v.real(); }},
        {"synth.clustered", [](CityInputs& c, const Value& v) { synth_of(c).city.clustered = v.flag(); }},
        {"synth.cluster_size", [](CityInputs& c, const Value& v) { synth_of(c).city.cluster_size = v.int32(); }},
        {"synth.no_analysis_share", [](CityInputs& c, const Value& v) { synth_of(c).no_analysis_share = v.real(); }},
        {"synth.decoy_share", [](CityInputs& c, const Value& v) { synth_of(c).decoy_share = v.real(); }},
        {"synth.start_date",
         [](CityInputs& c, const Value& v) {
             try {
                 synth_of(c).render.start_date = Date::parse(v.text);
             } catch (const FormatError&) {
                 v.fail("expected YYYY-MM-DD");
             }
         }},
        {"synth.date_step_days", [](CityInputs& c, const Value& v) { synth_of(c).render.date_step_days = v.int32(); }},
    };
    return keys;
}

bool valid_name(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
    });
}

}  // namespace

std::vector<int> default_annotation_indices(int date_count) {
    std::vector<int> out;
    for (int k = 1; k <= 4; ++k) {
        const int i = static_cast<int>(std::lround(k * (date_count - 1) / 4.0));
        if (i >= 1 && (out.empty() || i > out.back())) out.push_back(i);
    }
    return out;
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    CityInputs* city = nullptr;
    std::set<std::string> seen_global;
    std::set<std::string> seen_city;
    std::set<std::string> annotation_set;  // cities with explicit annotation indices
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = csv::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.substr(1, 5) != "city ")
                throw ConfigError("line " + std::to_string(line_no) + ": expected [city NAME]");
            const std::string name(csv::trim(line.substr(6, line.size() - 7)));
            if (!valid_name(name))
                throw ConfigError("line " + std::to_string(line_no) + ": city names use letters, digits, _ and -");
            for (const auto& c : cfg.cities)
                if (c.name == name) throw ConfigError("line " + std::to_string(line_no) + ": duplicate city " + name);
            cfg.cities.push_back({});
            city = &cfg.cities.back();
            city->name = name;
            seen_city.clear();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(csv::trim(line.substr(0, eq)));
        const Value value{std::string(csv::trim(line.substr(eq + 1))), line_no, &base_dir};
        if (city) {
            const auto it = city_keys().find(key);
            if (it == city_keys().end())
                throw ConfigError("line " + std::to_string(line_no) + ": unknown city key '" + key + "'");
            if (!seen_city.insert(key).second)
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
            it->second(*city, value);
            if (key == "synth.annotation_indices") annotation_set.insert(city->name);
        } else {
            const auto it = global_keys().find(key);
            if (it == global_keys().end())
                throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            if (!seen_global.insert(key).second)
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
            it->second(cfg, value);
        }
    }
    for (auto& c : cfg.cities) {
        if (!c.synth) continue;
        if (!annotation_set.count(c.name))
            c.synth->render.annotation_date_indices = default_annotation_indices(c.synth->render.date_count);
        const fs::path input = cfg.output_dir / c.name / "input";
        if (c.rasters.empty()) c.rasters = input / "rasters";
        if (c.aoi.empty()) c.aoi = input / "aoi.json";
        if (c.annotations.empty()) c.annotations = input / "annotations";
        if (c.events.empty()) c.events = input / "events.csv";
    }
    cfg.net.input_size = cfg.patch_size;
    cfg.train.jobs = cfg.jobs;
    cfg.forest.jobs = cfg.jobs;
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void RunConfig::validate() const {
    if (cities.empty()) throw ConfigError("config declares no [city NAME] section");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split.fraction must be in (0, 1)");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("split.validation_fraction must be in (0, 1)");
    if (!(target_recall > 0.0 && target_recall <= 1.0)) throw ConfigError("smooth.target_recall must be in (0, 1]");
    net.validate();
    train.validate();
    forest.validate();
    if (max_positives == 0 || max_negatives == 0 || max_validation == 0)
        throw ConfigError("sample caps must be positive");
    for (const auto& c : cities) {
        if (c.synth) {
            c.synth->render.validate();
            if (c.synth->render.date_count != c.synth->city.date_count)
                throw ConfigError("city " + c.name + ": date counts disagree");
            if (c.synth->city.width % patch_size || c.synth->city.height % patch_size)
                throw ConfigError("city " + c.name + ": synthetic extent must be a multiple of patch_size");
            continue;
        }
        for (const auto& [what, p] : {std::pair{"rasters", c.rasters}, std::pair{"aoi", c.aoi},
                                      std::pair{"annotations", c.annotations}}) {
            if (p.empty()) throw ConfigError("city " + c.name + ": missing '" + what + "'");
            if (!fs::exists(p)) throw ConfigError("city " + c.name + ": " + what + " path " + p.string() + " does not exist");
        }
        if (!c.events.empty() && !fs::exists(c.events))
            throw ConfigError("city " + c.name + ": events path " + c.events.string() + " does not exist");
    }
}

std::string RunConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "output_dir=" << output_dir.generic_string() << "\npatch_size=" << patch_size
       << "\ndate_binding=" << (date_binding == labels::DateBinding::Exact ? "exact" : "nearest")
       << "\nsplit=" << split_fraction << "," << split_seed << "," << validation_fraction << "\nnet=" << net.canonical()
       << "\ntrain=" << train.learning_rate << "," << train.batch_size << "," << train.epochs << "," << train.seed << ","
       << train.weight_init_scale << "," << hyperparameter_search << "," << max_positives << "," << max_negatives
       << "," << max_validation << "\nforest=" << forest.num_trees << "," << forest.max_depth << ","
       << forest.min_leaf << "," << forest.features_per_split << "," << forest.seed << ","
       << features.include_leads << "," << forest_max_rows << "\ntarget_recall=" << target_recall << "\n";
    for (const auto& c : cities) {
        os << "[city " << c.name << "]\n";
        if (c.synth) {
            const auto& s = *c.synth;
            os << "synth=" << s.city.width << "," << s.city.height << "," << s.city.building_density << ","
               << s.city.destruction_share << "," << s.city.seed << "," << s.city.date_count << ","
               << s.city.park_share << "," << s.city.clustered << "," << s.city.cluster_size << ","
               << s.render.illumination_shift << "," << s.render.noise_sigma << "," << s.render.clutter_density << "," << s.render.start_date.iso() << ","
               << s.render.date_step_days << "," << s.no_analysis_share << "," << s.decoy_share << "\nannotations=";
            for (int i : s.render.annotation_date_indices) os << i << ";";
            os << "\n";
        } else {
            os << "rasters=" << c.rasters.generic_string() << "\naoi=" << c.aoi.generic_string()
               << "\nannotations=" << c.annotations.generic_string() << "\nevents=" << c.events.generic_string()
               << "\n";
        }
    }
    return os.str();
}

void apply_seed_override(RunConfig& config, std::uint64_t seed) {
    config.split_seed = derive_seed(seed, 1) >> 1;
    config.train.seed = derive_seed(seed, 2) >> 1;
    config.forest.seed = derive_seed(seed, 3) >> 1;
    for (std::size_t i = 0; i < config.cities.size(); ++i)
        if (config.cities[i].synth) config.cities[i].synth->city.seed = derive_seed(seed, 4, i) >> 1;
}

}  // namespace destrack::pipeline
