#include "destrack/nn/forward_backward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "destrack/common/error.hpp"
#include "destrack/common/parallel.hpp"
#include "destrack/common/random.hpp"

namespace destrack::nn {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double activate(Activation a, double x) { return a == Activation::ReLU ? (x > 0 ? x : 0.0) : sigmoid(x); }

// Derivative expressed through the pre-activation value.
double activate_grad(Activation a, double x) {
    if (a == Activation::ReLU) return x > 0 ? 1.0 : 0.0;
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

struct Range {
    int lo, hi;
};

// Output rows/cols y for which y + d stays inside [0, side).
Range valid(int d, int side) { return {std::max(0, -d), std::min(side, side - d)}; }

// Same-padded stride-1 convolution of one sample.
void conv_forward(const double* in, int cin, int side, const double* w, const double* b, int cout, int k,
                  double* out) {
    const int pad = k / 2;
    const std::size_t plane = static_cast<std::size_t>(side) * side;
    for (int co = 0; co < cout; ++co) {
        double* dst = out + co * plane;
        std::fill(dst, dst + plane, b[co]);
        for (int ci = 0; ci < cin; ++ci) {
            const double* src = in + ci * plane;
            for (int ky = 0; ky < k; ++ky) {
                const int dy = ky - pad;
                const Range ry = valid(dy, side);
                for (int kx = 0; kx < k; ++kx) {
                    const int dx = kx - pad;
                    const Range rx = valid(dx, side);
                    const double wv = w[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
                    for (int y = ry.lo; y < ry.hi; ++y) {
                        double* d = dst + y * side;
                        const double* s = src + (y + dy) * side + dx;
                        for (int x = rx.lo; x < rx.hi; ++x) d[x] += wv * s[x];
                    }
                }
            }
        }
    }
}

void check_finite(const std::vector<double>& v, const char* where) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + where);
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, const NetworkParams& params, const Tensor& batch,
                      const ForwardOptions& options) {
    spec.validate();
    params.check_shapes(spec);
    if (batch.shape.size() != 4 || batch.shape[1] != spec.input_channels || batch.shape[2] != spec.input_size ||
        batch.shape[3] != spec.input_size)
        throw ShapeError("batch must be N x " + std::to_string(spec.input_channels) + " x " +
                         std::to_string(spec.input_size) + " x " + std::to_string(spec.input_size));
    batch.check();
    const int n = batch.shape[0];
    const bool train = options.training_mode;
    const auto& w = params.weights;

    ForwardCache cache;
    cache.batch = n;
    std::vector<double> current = batch.values;
    int channels = spec.input_channels;
    int side = spec.input_size;
    const int s = spec.pool_stride;
    const double p = spec.dropout_prob;
    const bool drop = train && p > 0.0;

    for (int k = 0; k < spec.num_conv_blocks; ++k) {
        BlockCache bc;
        bc.in_channels = channels;
        bc.out_channels = spec.filters(k);
        bc.side = side;
        bc.pooled_side = side / s;
        const std::size_t in_plane = static_cast<std::size_t>(side) * side;
        const std::size_t ps = bc.pooled_side;
        const std::size_t out_plane = ps * ps;
        const std::size_t in_sz = channels * in_plane;
        const std::size_t conv_sz = bc.out_channels * in_plane;
        const std::size_t pool_sz = bc.out_channels * out_plane;
        bc.conv.assign(n * conv_sz, 0.0);
        bc.argmax.assign(n * pool_sz, 0);
        if (drop) bc.mask.assign(n * pool_sz, 0.0);
        std::vector<double> next(n * pool_sz);

        parallel_for(n, options.jobs, [&](std::size_t i) {
            double* conv = bc.conv.data() + i * conv_sz;
            conv_forward(current.data() + i * in_sz, channels, side, w.conv_w[k].data(), w.conv_b[k].data(),
                         bc.out_channels, spec.kernel_size, conv);
            std::uint32_t* am = bc.argmax.data() + i * pool_sz;
            double* out = next.data() + i * pool_sz;
            for (int c = 0; c < bc.out_channels; ++c) {
                const double* plane = conv + c * in_plane;
                for (std::size_t py = 0; py < ps; ++py) {
                    for (std::size_t px = 0; px < ps; ++px) {
                        std::size_t best = py * s * side + px * s;
                        for (int yy = 0; yy < s; ++yy)
                            for (int xx = 0; xx < s; ++xx) {
                                const std::size_t off = (py * s + yy) * side + px * s + xx;
                                if (plane[off] > plane[best]) best = off;
                            }
                        const std::size_t o = c * out_plane + py * ps + px;
                        am[o] = static_cast<std::uint32_t>(best);
                        out[o] = std::max(0.0, plane[best]);
                    }
                }
            }
            if (drop) {
                const std::uint64_t base = derive_seed(options.dropout_seed, k, i);
                double* mask = bc.mask.data() + i * pool_sz;
                const double keep_scale = 1.0 / (1.0 - p);
                for (std::size_t j = 0; j < pool_sz; ++j) {
                    mask[j] = unit_from_bits(mix64(base + j)) < p ? 0.0 : keep_scale;
                    out[j] *= mask[j];
                }
            }
        });

        if (train) {
            bc.input = std::move(current);
            cache.blocks.push_back(std::move(bc));
        }
        current = std::move(next);
        channels = spec.filters(k);
        side /= s;
    }

    const int D = spec.flat_size();
    const int U = spec.fc_units;
    // fc1
    std::vector<double> fc1(static_cast<std::size_t>(n) * U);
    parallel_for(n, options.jobs, [&](std::size_t i) {
        const double* x = current.data() + i * D;
        for (int u = 0; u < U; ++u) {
            const double* row = w.fc1_w.data() + static_cast<std::size_t>(u) * D;
            double acc = w.fc1_b[u];
            for (int d = 0; d < D; ++d) acc += row[d] * x[d];
            fc1[i * U + u] = acc;
        }
    });

    // batch norm
    std::vector<double> mean(U), var(U), xhat(fc1.size()), bn(fc1.size());
    if (train) {
        for (int u = 0; u < U; ++u) {
            double m = 0;
            for (int i = 0; i < n; ++i) m += fc1[i * U + u];
            m /= n;
            double v = 0;
            for (int i = 0; i < n; ++i) v += (fc1[i * U + u] - m) * (fc1[i * U + u] - m);
            mean[u] = m;
            var[u] = v / n;
        }
    } else {
        mean = params.bn_running_mean;
        var = params.bn_running_var;
    }
    for (int u = 0; u < U; ++u) {
        const double inv = 1.0 / std::sqrt(var[u] + kBatchNormEps);
        for (int i = 0; i < n; ++i) {
            const std::size_t j = static_cast<std::size_t>(i) * U + u;
            xhat[j] = (fc1[j] - mean[u]) * inv;
            bn[j] = w.bn_gamma[u] * xhat[j] + w.bn_beta[u];
        }
    }
    std::vector<double> act1(bn.size());
    for (std::size_t j = 0; j < bn.size(); ++j) act1[j] = activate(spec.fc_activation, bn[j]);

    // fc2
    std::vector<double> fc2(act1.size()), act2(act1.size());
    for (int i = 0; i < n; ++i) {
        const double* x = act1.data() + static_cast<std::size_t>(i) * U;
        for (int u = 0; u < U; ++u) {
            const double* row = w.fc2_w.data() + static_cast<std::size_t>(u) * U;
            double acc = w.fc2_b[u];
            for (int d = 0; d < U; ++d) acc += row[d] * x[d];
            fc2[i * U + u] = acc;
            act2[i * U + u] = activate(spec.fc_activation, acc);
        }
    }

    ForwardResult result;
    result.logits.resize(n);
    result.scores.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = w.out_b[0];
        for (int u = 0; u < U; ++u) z += w.out_w[u] * act2[i * U + u];
        result.logits[i] = z;
        result.scores[i] = sigmoid(z);
    }
    check_finite(result.logits, "network output");

    if (train) {
        cache.flat = std::move(current);
        cache.fc1 = std::move(fc1);
        cache.xhat = std::move(xhat);
        cache.batch_mean = std::move(mean);
        cache.batch_var = std::move(var);
        cache.bn = std::move(bn);
        cache.act1 = std::move(act1);
        cache.fc2 = std::move(fc2);
        cache.act2 = std::move(act2);
        result.cache = std::move(cache);
    }
    return result;
}

ForwardResult forward(const NetworkSpec& spec, const NetworkParams& params,
                      std::span<const raster::PatchSample* const> samples, const ForwardOptions& options) {
    return forward(spec, params, assemble_batch(samples, spec.input_size), options);
}

double bce_loss(std::span<const double> logits, std::span<const double> labels) {
    if (logits.size() != labels.size()) throw DimensionError("logits and labels differ in length");
    if (logits.empty()) throw InputError("empty batch");
    double total = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        total += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
    }
    return total / static_cast<double>(logits.size());
}

ParamSet backward(const NetworkSpec& spec, const NetworkParams& params, const ForwardResult& result,
                  std::span<const double> labels, int jobs) {
    if (!result.cache) throw StateError("backward needs a training-mode forward cache");
    const ForwardCache& c = *result.cache;
    const int n = c.batch;
    if (labels.size() != static_cast<std::size_t>(n)) throw DimensionError("label count differs from batch size");
    const auto& w = params.weights;
    ParamSet g = w.zeros_like();
    const int U = spec.fc_units;
    const int D = spec.flat_size();
    const Activation act = spec.fc_activation;

    // Output layer.
    std::vector<double> dact2(static_cast<std::size_t>(n) * U);
    for (int i = 0; i < n; ++i) {
        const double dz = (result.scores[i] - labels[i]) / n;
        g.out_b[0] += dz;
        for (int u = 0; u < U; ++u) {
            g.out_w[u] += dz * c.act2[i * U + u];
            dact2[i * U + u] = dz * w.out_w[u];
        }
    }

    // fc2
    std::vector<double> dact1(dact2.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int u = 0; u < U; ++u) {
            const std::size_t j = static_cast<std::size_t>(i) * U + u;
            const double dh = dact2[j] * activate_grad(act, c.fc2[j]);
            if (dh == 0.0) continue;
            g.fc2_b[u] += dh;
            const double* x = c.act1.data() + static_cast<std::size_t>(i) * U;
            double* gw = g.fc2_w.data() + static_cast<std::size_t>(u) * U;
            const double* wr = w.fc2_w.data() + static_cast<std::size_t>(u) * U;
            double* dx = dact1.data() + static_cast<std::size_t>(i) * U;
            for (int d = 0; d < U; ++d) {
                gw[d] += dh * x[d];
                dx[d] += dh * wr[d];
            }
        }
    }

    // Batch norm with batch statistics.
    std::vector<double> dfc1(dact1.size());
    for (int u = 0; u < U; ++u) {
        const double inv = 1.0 / std::sqrt(c.batch_var[u] + kBatchNormEps);
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int i = 0; i < n; ++i) {
            const std::size_t j = static_cast<std::size_t>(i) * U + u;
            const double dz = dact1[j] * activate_grad(act, c.bn[j]);
            g.bn_gamma[u] += dz * c.xhat[j];
            g.bn_beta[u] += dz;
            const double dxhat = dz * w.bn_gamma[u];
            dfc1[j] = dxhat;
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * c.xhat[j];
        }
        for (int i = 0; i < n; ++i) {
            const std::size_t j = static_cast<std::size_t>(i) * U + u;
            dfc1[j] = inv / n * (n * dfc1[j] - sum_dxhat - c.xhat[j] * sum_dxhat_xhat);
        }
    }

    // fc1
    for (int i = 0; i < n; ++i)
        for (int u = 0; u < U; ++u) g.fc1_b[u] += dfc1[static_cast<std::size_t>(i) * U + u];
    parallel_for(U, jobs, [&](std::size_t u) {
        double* gw = g.fc1_w.data() + u * D;
        for (int i = 0; i < n; ++i) {
            const double dh = dfc1[static_cast<std::size_t>(i) * U + u];
            const double* x = c.flat.data() + static_cast<std::size_t>(i) * D;
            for (int d = 0; d < D; ++d) gw[d] += dh * x[d];
        }
    });
    if (spec.num_conv_blocks == 0) return g;

    std::vector<double> dflat(static_cast<std::size_t>(n) * D, 0.0);
    parallel_for(n, jobs, [&](std::size_t i) {
        double* dx = dflat.data() + i * D;
        for (int u = 0; u < U; ++u) {
            const double dh = dfc1[i * U + u];
            const double* wr = w.fc1_w.data() + static_cast<std::size_t>(u) * D;
            for (int d = 0; d < D; ++d) dx[d] += dh * wr[d];
        }
    });

    // Conv blocks, last to first.
    std::vector<double> dout = std::move(dflat);
    const int k = spec.kernel_size;
    const int pad = k / 2;
    for (int b = spec.num_conv_blocks - 1; b >= 0; --b) {
        const BlockCache& bc = c.blocks[b];
        const int side = bc.side;
        const std::size_t plane = static_cast<std::size_t>(side) * side;
        const std::size_t ps = bc.pooled_side;
        const std::size_t pool_sz = bc.out_channels * ps * ps;
        const std::size_t conv_sz = bc.out_channels * plane;
        const std::size_t in_sz = bc.in_channels * plane;

        // Through dropout, pooling and ReLU.
        std::vector<double> dconv(static_cast<std::size_t>(n) * conv_sz, 0.0);
        parallel_for(n, jobs, [&](std::size_t i) {
            for (int ch = 0; ch < bc.out_channels; ++ch) {
                for (std::size_t q = 0; q < ps * ps; ++q) {
                    const std::size_t o = i * pool_sz + ch * ps * ps + q;
                    double d = dout[o];
                    if (!bc.mask.empty()) d *= bc.mask[o];
                    const std::size_t at = i * conv_sz + ch * plane + bc.argmax[o];
                    if (bc.conv[at] > 0) dconv[at] += d;
                }
            }
        });

        // Weight and bias gradients, one output channel per task.
        const int cin = bc.in_channels;
        parallel_for(bc.out_channels, jobs, [&](std::size_t co) {
            double* gw = g.conv_w[b].data() + co * cin * k * k;
            double gb = 0;
            for (int i = 0; i < n; ++i) {
                const double* dc = dconv.data() + i * conv_sz + co * plane;
                for (std::size_t q = 0; q < plane; ++q) gb += dc[q];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* in = bc.input.data() + i * in_sz + ci * plane;
                    for (int ky = 0; ky < k; ++ky) {
                        const int dy = ky - pad;
                        const Range ry = valid(dy, side);
                        for (int kx = 0; kx < k; ++kx) {
                            const int dx = kx - pad;
                            const Range rx = valid(dx, side);
                            double acc = 0;
                            for (int y = ry.lo; y < ry.hi; ++y) {
                                const double* d = dc + y * side;
                                const double* s = in + (y + dy) * side + dx;
                                for (int x = rx.lo; x < rx.hi; ++x) acc += d[x] * s[x];
                            }
                            gw[(ci * k + ky) * k + kx] += acc;
                        }
                    }
                }
            }
            g.conv_b[b][co] += gb;
        });
        if (b == 0) break;

        // Input gradient, one sample per task.
        std::vector<double> din(static_cast<std::size_t>(n) * in_sz, 0.0);
        parallel_for(n, jobs, [&](std::size_t i) {
            for (int co = 0; co < bc.out_channels; ++co) {
                const double* dc = dconv.data() + i * conv_sz + co * plane;
                for (int ci = 0; ci < cin; ++ci) {
                    double* di = din.data() + i * in_sz + ci * plane;
                    for (int ky = 0; ky < k; ++ky) {
                        const int dy = ky - pad;
                        const Range ry = valid(dy, side);
                        for (int kx = 0; kx < k; ++kx) {
                            const int dx = kx - pad;
                            const Range rx = valid(dx, side);
                            const double wv = w.conv_w[b][((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
                            for (int y = ry.lo; y < ry.hi; ++y) {
                                const double* d = dc + y * side;
                                double* s = di + (y + dy) * side + dx;
                                for (int x = rx.lo; x < rx.hi; ++x) s[x] += wv * d[x];
                            }
                        }
                    }
                }
            }
        });
        dout = std::move(din);
    }
    return g;
}

}  // namespace destrack::nn
