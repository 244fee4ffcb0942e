#include "destrack/nn/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "destrack/common/error.hpp"
#include "destrack/common/hash.hpp"

namespace destrack::nn {

namespace {

constexpr const char* kFormat = "destrack-cnn";

nlohmann::ordered_json spec_json(const NetworkSpec& s) {
    nlohmann::ordered_json j;
    j["num_conv_blocks"] = s.num_conv_blocks;
    j["kernel_size"] = s.kernel_size;
    j["pool_stride"] = s.pool_stride;
    j["dropout_prob"] = s.dropout_prob;
    j["fc_units"] = s.fc_units;
    j["fc_activation"] = to_string(s.fc_activation);
    j["input_channels"] = s.input_channels;
    j["input_size"] = s.input_size;
    j["base_filters"] = s.base_filters;
    return j;
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.num_conv_blocks = j.at("num_conv_blocks").get<int>();
    s.kernel_size = j.at("kernel_size").get<int>();
    s.pool_stride = j.at("pool_stride").get<int>();
    s.dropout_prob = j.at("dropout_prob").get<double>();
    s.fc_units = j.at("fc_units").get<int>();
    s.fc_activation = parse_activation(j.at("fc_activation").get<std::string>());
    s.input_channels = j.at("input_channels").get<int>();
    s.input_size = j.at("input_size").get<int>();
    s.base_filters = j.at("base_filters").get<int>();
    s.validate();
    return s;
}

}  // namespace

std::string spec_hash(const NetworkSpec& spec) { return hex64(fnv1a64(spec.canonical())); }

void save_model(const Model& model, const std::filesystem::path& path) {
    model.params.check_shapes(model.spec);
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kModelFormatVersion;
    j["spec_hash"] = spec_hash(model.spec);
    j["spec"] = spec_json(model.spec);
    auto arrays = nlohmann::ordered_json::array();
    model.params.weights.for_each([&](const std::string& name, const std::vector<double>& v) {
        nlohmann::ordered_json a;
        a["name"] = name;
        a["values"] = v;
        arrays.push_back(std::move(a));
    });
    j["params"] = std::move(arrays);
    j["bn_running_mean"] = model.params.bn_running_mean;
    j["bn_running_var"] = model.params.bn_running_var;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw InputError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) throw FormatError(path.string() + " is not a model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw FormatError("unsupported model version " + std::to_string(version));
        Model m;
        m.spec = spec_from_json(j.at("spec"));
        if (j.at("spec_hash").get<std::string>() != spec_hash(m.spec))
            throw FormatError("spec hash mismatch in " + path.string());
        m.params = init_params(m.spec, 1.0, 0);
        const auto& arrays = j.at("params");
        std::size_t k = 0;
        m.params.weights.for_each([&](const std::string& name, std::vector<double>& v) {
            if (k >= arrays.size()) throw FormatError("missing parameter array " + name);
            const auto& a = arrays[k++];
            if (a.at("name").get<std::string>() != name)
                throw FormatError("expected parameter array " + name + ", found " + a.at("name").get<std::string>());
            v = a.at("values").get<std::vector<double>>();
        });
        if (k != arrays.size()) throw FormatError("unexpected extra parameter arrays");
        m.params.bn_running_mean = j.at("bn_running_mean").get<std::vector<double>>();
        m.params.bn_running_var = j.at("bn_running_var").get<std::vector<double>>();
        m.params.check_shapes(m.spec);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace destrack::nn
