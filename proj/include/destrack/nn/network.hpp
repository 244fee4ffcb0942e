#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "destrack/raster/patch_grid.hpp"

namespace destrack::nn {

enum class Activation { ReLU, Sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

/// Architecture of the change-detection classifier.
///
/// Input is the pre crop stacked on the post crop (6 channels). Each conv
/// block is: same-padded stride-1 convolution -> ReLU -> max-pool with
/// window = stride = pool_stride -> dropout. Block k has
/// base_filters * 2^k output channels. The flattened features then go
/// through fc1 -> batch-norm -> activation -> fc2 -> activation -> a single
/// logit -> sigmoid.
struct NetworkSpec {
    int num_conv_blocks = 2;
    int kernel_size = 3;
    int pool_stride = 2;
    double dropout_prob = 0.1;
    int fc_units = 64;
    Activation fc_activation = Activation::ReLU;
    int input_channels = 6;
    int input_size = 64;
    int base_filters = 8;

    /// Throws ConfigError on any inconsistency.
    void validate() const;

    int filters(int block) const { return base_filters << block; }
    int channels_after(int block) const { return block < 0 ? input_channels : filters(block); }
    /// Spatial side length after `blocks` blocks (0 -> input size).
    int side_after(int blocks) const;
    int flat_size() const;
    std::size_t parameter_count() const;

    /// Stable textual form used for hashing and the model file.
    std::string canonical() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Dense row-major array with an explicit shape.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    std::size_t size() const { return values.size(); }
    /// Throws ShapeError if values.size() differs from the product of shape
    /// and NumericError if any value is not finite.
    void check() const;
};

/// Builds an N x 6 x S x S input: pre RGB then post RGB, scaled to [0, 1].
Tensor assemble_batch(std::span<const raster::PatchSample* const> samples, int input_size);

/// Learnable arrays. The same layout holds gradients.
struct ParamSet {
    std::vector<std::vector<double>> conv_w;  // per block, [out][in][k][k]
    std::vector<std::vector<double>> conv_b;  // per block, [out]
    std::vector<double> fc1_w, fc1_b;         // [units][flat], [units]
    std::vector<double> bn_gamma, bn_beta;    // [units]
    std::vector<double> fc2_w, fc2_b;         // [units][units], [units]
    std::vector<double> out_w, out_b;         // [units], [1]

    /// Visits every array in the declared (serialization) order.
    template <class Self, class Fn>
    static void visit(Self& self, Fn&& fn) {
        for (std::size_t k = 0; k < self.conv_w.size(); ++k) {
            fn("conv" + std::to_string(k) + ".weight", self.conv_w[k]);
            fn("conv" + std::to_string(k) + ".bias", self.conv_b[k]);
        }
        fn(std::string("fc1.weight"), self.fc1_w);
        fn(std::string("fc1.bias"), self.fc1_b);
        fn(std::string("bn.gamma"), self.bn_gamma);
        fn(std::string("bn.beta"), self.bn_beta);
        fn(std::string("fc2.weight"), self.fc2_w);
        fn(std::string("fc2.bias"), self.fc2_b);
        fn(std::string("out.weight"), self.out_w);
        fn(std::string("out.bias"), self.out_b);
    }
    template <class Fn>
    void for_each(Fn&& fn) { visit(*this, fn); }
    template <class Fn>
    void for_each(Fn&& fn) const { visit(*this, fn); }

    /// Same shapes, all zeros.
    ParamSet zeros_like() const;
    std::size_t size() const;
};

struct NetworkParams {
    ParamSet weights;
    std::vector<double> bn_running_mean;
    std::vector<double> bn_running_var;

    /// Throws ShapeError if shapes disagree with `spec`.
    void check_shapes(const NetworkSpec& spec) const;
};

/// Uniform weights in [-s, s] with s = weight_init_scale / sqrt(fan_in);
/// zero biases; batch-norm scale 1, shift 0, running mean 0, variance 1.
NetworkParams init_params(const NetworkSpec& spec, double weight_init_scale, std::uint64_t seed);

}  // namespace destrack::nn
