#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "destrack/nn/network.hpp"

namespace destrack::nn {

inline constexpr double kBatchNormEps = 1e-5;

struct BlockCache {
    int in_channels = 0;
    int out_channels = 0;
    int side = 0;
    int pooled_side = 0;
    std::vector<double> input;           // N x in x side x side
    std::vector<double> conv;            // N x out x side x side, before ReLU
    std::vector<std::uint32_t> argmax;   // N x out x pooled x pooled, offset in the plane
    std::vector<double> mask;            // same shape as argmax; empty without dropout
};

/// Activations kept by a training-mode forward pass.
struct ForwardCache {
    int batch = 0;
    std::vector<BlockCache> blocks;
    std::vector<double> flat;        // N x D
    std::vector<double> fc1;         // N x U
    std::vector<double> xhat;        // N x U, normalized
    std::vector<double> batch_mean;  // U
    std::vector<double> batch_var;   // U, biased
    std::vector<double> bn;          // N x U
    std::vector<double> act1;        // N x U
    std::vector<double> fc2;         // N x U
    std::vector<double> act2;        // N x U
};

struct ForwardOptions {
    bool training_mode = false;
    /// Seeds the dropout masks; the same seed reproduces the same masks.
    std::uint64_t dropout_seed = 0;
    int jobs = 1;
};

struct ForwardResult {
    std::vector<double> scores;
    std::vector<double> logits;
    std::optional<ForwardCache> cache;  // present only in training mode
};

/// Throws ShapeError if the batch is not N x input_channels x S x S or the
/// params disagree with the spec, NumericError on a non-finite activation.
ForwardResult forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch,
                      const ForwardOptions& options = {});

ForwardResult forward(const NetworkSpec& spec, const NetworkParams& params,
                      std::span<const raster::PatchSample* const> samples, const ForwardOptions& options = {});

/// Mean binary cross-entropy computed from logits.
double bce_loss(std::span<const double> logits, std::span<const double> labels);

/// Gradient of the mean BCE over the batch with respect to every learnable
/// parameter. Throws StateError if `result` has no training cache.
ParamSet backward(const NetworkSpec& spec, const NetworkParams& params, const ForwardResult& result,
                  std::span<const double> labels, int jobs = 1);

}  // namespace destrack::nn
