#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace destrack::pipeline {

/// Lower-case hex SHA-256 of a file's bytes. Throws InputError if unreadable.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

struct StageRecord {
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
    std::string started;
    std::string finished;
};

/// Per-stage record of consumed and produced files. Paths are stored
/// relative to the run directory when they lie inside it.
class Manifest {
public:
    explicit Manifest(std::filesystem::path run_dir) : run_dir_(std::move(run_dir)) {}

    /// Reads <run_dir>/manifest.json if present.
    static Manifest load(const std::filesystem::path& run_dir);
    void save() const;

    const std::string& config_hash() const { return config_hash_; }
    /// Changing the config hash forgets all stage records.
    void set_config_hash(const std::string& hash);

    /// True if the stage has a record whose inputs and outputs all still
    /// exist with the recorded hashes and whose inputs equal `inputs`.
    bool up_to_date(const std::string& stage, const std::vector<std::filesystem::path>& inputs) const;

    void record(const std::string& stage, const std::vector<std::filesystem::path>& inputs,
                const std::vector<std::filesystem::path>& outputs, const std::string& started);

    const std::map<std::string, StageRecord>& stages() const { return stages_; }
    std::string key(const std::filesystem::path& p) const;
    std::filesystem::path resolve(const std::string& key) const;

private:
    std::filesystem::path run_dir_;
    std::string config_hash_;
    std::map<std::string, StageRecord> stages_;
};

/// ISO-8601 UTC timestamp of now.
std::string utc_now();

/// Exclusive <run_dir>/.lock held for the object's lifetime. Throws
/// StateError if another instance holds it.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

}  // namespace destrack::pipeline
