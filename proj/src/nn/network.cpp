#include "destrack/nn/network.hpp"

#include <cmath>
#include <sstream>

#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"

namespace destrack::nn {

std::string_view to_string(Activation a) { return a == Activation::ReLU ? "relu" : "sigmoid"; }

Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

void NetworkSpec::validate() const {
    if (num_conv_blocks < 0) throw ConfigError("num_conv_blocks must be >= 0");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd and >= 1");
    if (pool_stride < 1) throw ConfigError("pool_stride must be >= 1");
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw ConfigError("dropout_prob must be in [0, 1)");
    if (fc_units < 1) throw ConfigError("fc_units must be >= 1");
    if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
    if (input_size < 1) throw ConfigError("input_size must be >= 1");
    if (base_filters < 1) throw ConfigError("base_filters must be >= 1");
    if (num_conv_blocks > 0 && (base_filters << (num_conv_blocks - 1)) > 4096)
        throw ConfigError("too many filters");
    if (side_after(num_conv_blocks) < 1)
        throw ConfigError("spatial size collapses to zero after " + std::to_string(num_conv_blocks) + " blocks");
}

int NetworkSpec::side_after(int blocks) const {
    int side = input_size;
    for (int k = 0; k < blocks; ++k) side /= pool_stride;
    return side;
}

int NetworkSpec::flat_size() const {
    const int side = side_after(num_conv_blocks);
    return channels_after(num_conv_blocks - 1) * side * side;
}

std::size_t NetworkSpec::parameter_count() const {
    std::size_t n = 0;
    for (int k = 0; k < num_conv_blocks; ++k) {
        const std::size_t cin = channels_after(k - 1), cout = filters(k);
        n += cout * cin * kernel_size * kernel_size + cout;
    }
    const std::size_t u = fc_units;
    n += u * flat_size() + u;  // fc1
    n += 2 * u;                // batch-norm scale and shift
    n += u * u + u;            // fc2
    n += u + 1;                // output
    return n;
}

std::string NetworkSpec::canonical() const {
    std::ostringstream os;
    os << "blocks=" << num_conv_blocks << ";kernel=" << kernel_size << ";pool=" << pool_stride
       << ";dropout=" << dropout_prob << ";fc_units=" << fc_units << ";activation=" << to_string(fc_activation)
       << ";in_channels=" << input_channels << ";in_size=" << input_size << ";base_filters=" << base_filters;
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    values.assign(n, 0.0);
}

void Tensor::check() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    if (n != values.size()) throw ShapeError("tensor holds " + std::to_string(values.size()) + " values, shape implies " +
                                             std::to_string(n));
    for (double v : values)
        if (!std::isfinite(v)) throw NumericError("tensor contains a non-finite value");
}

Tensor assemble_batch(std::span<const raster::PatchSample* const> samples, int input_size) {
    const int n = static_cast<int>(samples.size());
    Tensor t({n, 6, input_size, input_size});
    const std::size_t plane = static_cast<std::size_t>(input_size) * input_size;
    const std::size_t expected = plane * 3;
    for (int i = 0; i < n; ++i) {
        const auto& s = *samples[i];
        if (s.pre_pixels.size() != expected || s.post_pixels.size() != expected)
            throw ShapeError("patch sample is not " + std::to_string(input_size) + "x" + std::to_string(input_size) +
                             "x3");
        double* base = t.values.data() + static_cast<std::size_t>(i) * 6 * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            for (int c = 0; c < 3; ++c) {
                base[c * plane + px] = s.pre_pixels[px * 3 + c] / 255.0;
                base[(3 + c) * plane + px] = s.post_pixels[px * 3 + c] / 255.0;
            }
        }
    }
    return t;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet z = *this;
    z.for_each([](const std::string&, std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); });
    return z;
}

std::size_t ParamSet::size() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const std::vector<double>& v) { n += v.size(); });
    return n;
}

void NetworkParams::check_shapes(const NetworkSpec& spec) const {
    auto expect = [](const std::vector<double>& v, std::size_t n, const char* what) {
        if (v.size() != n)
            throw ShapeError(std::string(what) + " has " + std::to_string(v.size()) + " values, expected " +
                             std::to_string(n));
    };
    const auto& w = weights;
    if (w.conv_w.size() != static_cast<std::size_t>(spec.num_conv_blocks) || w.conv_b.size() != w.conv_w.size())
        throw ShapeError("conv block count does not match spec");
    const std::size_t k2 = static_cast<std::size_t>(spec.kernel_size) * spec.kernel_size;
    for (int k = 0; k < spec.num_conv_blocks; ++k) {
        expect(w.conv_w[k], static_cast<std::size_t>(spec.filters(k)) * spec.channels_after(k - 1) * k2, "conv weight");
        expect(w.conv_b[k], spec.filters(k), "conv bias");
    }
    const std::size_t u = spec.fc_units;
    expect(w.fc1_w, u * spec.flat_size(), "fc1 weight");
    expect(w.fc1_b, u, "fc1 bias");
    expect(w.bn_gamma, u, "bn gamma");
    expect(w.bn_beta, u, "bn beta");
    expect(w.fc2_w, u * u, "fc2 weight");
    expect(w.fc2_b, u, "fc2 bias");
    expect(w.out_w, u, "output weight");
    expect(w.out_b, 1, "output bias");
    expect(bn_running_mean, u, "bn running mean");
    expect(bn_running_var, u, "bn running variance");
    for (double v : bn_running_var)
        if (!(v > 0.0)) throw ShapeError("batch-norm running variance must be positive");
}

NetworkParams init_params(const NetworkSpec& spec, double weight_init_scale, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, 0x1417));
    auto uniform = [&](std::size_t n, std::size_t fan_in) {
        const double s = weight_init_scale / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-s, s);
        return v;
    };
    NetworkParams p;
    auto& w = p.weights;
    const std::size_t k2 = static_cast<std::size_t>(spec.kernel_size) * spec.kernel_size;
    for (int k = 0; k < spec.num_conv_blocks; ++k) {
        const std::size_t cin = spec.channels_after(k - 1), cout = spec.filters(k);
        w.conv_w.push_back(uniform(cout * cin * k2, cin * k2));
        w.conv_b.emplace_back(cout, 0.0);
    }
    const std::size_t u = spec.fc_units, flat = spec.flat_size();
    w.fc1_w = uniform(u * flat, flat);
    w.fc1_b.assign(u, 0.0);
    w.bn_gamma.assign(u, 1.0);
    w.bn_beta.assign(u, 0.0);
    w.fc2_w = uniform(u * u, u);
    w.fc2_b.assign(u, 0.0);
    w.out_w = uniform(u, u);
    w.out_b.assign(1, 0.0);
    p.bn_running_mean.assign(u, 0.0);
    p.bn_running_var.assign(u, 1.0);
    return p;
}

}  // namespace destrack::nn
