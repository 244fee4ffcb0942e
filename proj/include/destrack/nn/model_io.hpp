#pragma once

#include <filesystem>
#include <string>

#include "destrack/nn/network.hpp"

namespace destrack::nn {

inline constexpr int kModelFormatVersion = 1;

struct Model {
    NetworkSpec spec;
    NetworkParams params;
};

/// 16 hex digits identifying the architecture.
std::string spec_hash(const NetworkSpec& spec);

/// JSON: {"format", "version", "spec_hash", "spec", "params": [{name, values}...],
/// "bn_running_mean", "bn_running_var"} with params in declared order.
void save_model(const Model& model, const std::filesystem::path& path);

/// Throws FormatError on a wrong format, version or spec hash and
/// ShapeError if the arrays disagree with the stored spec.
Model load_model(const std::filesystem::path& path);

}  // namespace destrack::nn
