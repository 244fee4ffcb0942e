#include "destrack/pipeline/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include <json.hpp>
#include <openssl/evp.h>

#include "destrack/common/error.hpp"

namespace destrack::pipeline {

namespace fs = std::filesystem;

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    }
    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (unsigned i = 0; i < len; ++i) {
            out.push_back(digits[md[i] >> 4]);
            out.push_back(digits[md[i] & 15]);
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    Sha256 h;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string sha256_text(const std::string& text) {
    Sha256 h;
    h.update(text.data(), text.size());
    return h.hex();
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string Manifest::key(const fs::path& p) const {
    const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(run_dir_));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return fs::weakly_canonical(p).generic_string();
}

fs::path Manifest::resolve(const std::string& key) const {
    const fs::path p(key);
    return p.is_absolute() ? p : run_dir_ / p;
}

Manifest Manifest::load(const fs::path& run_dir) {
    Manifest m(run_dir);
    const fs::path path = run_dir / "manifest.json";
    if (!fs::exists(path)) return m;
    std::ifstream in(path);
    try {
        const auto j = nlohmann::json::parse(in);
        m.config_hash_ = j.at("config_hash").get<std::string>();
        for (const auto& [name, s] : j.at("stages").items()) {
            StageRecord r;
            r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
            r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
            r.started = s.at("started").get<std::string>();
            r.finished = s.at("finished").get<std::string>();
            m.stages_[name] = std::move(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return m;
}

void Manifest::save() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash_;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    for (const auto& [name, r] : stages_) {
        nlohmann::ordered_json s;
        s["inputs"] = r.inputs;
        s["outputs"] = r.outputs;
        s["started"] = r.started;
        s["finished"] = r.finished;
        stages[name] = std::move(s);
    }
    j["stages"] = std::move(stages);
    const fs::path tmp = run_dir_ / "manifest.json.tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, run_dir_ / "manifest.json");
}

void Manifest::set_config_hash(const std::string& hash) {
    if (hash != config_hash_) stages_.clear();
    config_hash_ = hash;
}

bool Manifest::up_to_date(const std::string& stage, const std::vector<fs::path>& inputs) const {
    const auto it = stages_.find(stage);
    if (it == stages_.end()) return false;
    const auto& r = it->second;
    if (r.inputs.size() != inputs.size()) return false;
    for (const auto& p : inputs) {
        const auto in = r.inputs.find(key(p));
        if (in == r.inputs.end() || !fs::exists(p) || sha256_file(p) != in->second) return false;
    }
    for (const auto& [k, hash] : r.outputs) {
        const auto p = resolve(k);
        if (!fs::exists(p) || sha256_file(p) != hash) return false;
    }
    return true;
}

void Manifest::record(const std::string& stage, const std::vector<fs::path>& inputs,
                      const std::vector<fs::path>& outputs, const std::string& started) {
    StageRecord r;
    for (const auto& p : inputs) r.inputs[key(p)] = sha256_file(p);
    for (const auto& p : outputs) r.outputs[key(p)] = sha256_file(p);
    r.started = started;
    r.finished = utc_now();
    stages_[stage] = std::move(r);
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
    fs::create_directories(run_dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
        throw StateError("another run holds " + path_.string() + " (remove it if no run is active)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
        // The lock is still held; the pid is informational only.
    }
}

RunLock::~RunLock() {
    if (fd_ >= 0) {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

}  // namespace destrack::pipeline
