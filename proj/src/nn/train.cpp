#include "destrack/nn/train.hpp"

#include <cmath>
#include <numeric>

#include "destrack/common/csv.hpp"
#include "destrack/common/error.hpp"
#include "destrack/common/random.hpp"
#include "destrack/evaluation/metrics.hpp"
#include "destrack/nn/forward_backward.hpp"

namespace destrack::nn {

namespace {

constexpr double kRunningMomentum = 0.1;

void sgd_step(ParamSet& params, const ParamSet& grad, double lr) {
    std::vector<std::vector<double>*> dst;
    params.for_each([&](const std::string&, std::vector<double>& v) { dst.push_back(&v); });
    std::size_t k = 0;
    grad.for_each([&](const std::string&, const std::vector<double>& g) {
        auto& v = *dst[k++];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    });
}

double validation_auc(const NetworkSpec& spec, const NetworkParams& params, std::span<const Example> val, int jobs) {
    const auto scores = predict(spec, params, val, jobs);
    evaluation::ScoredLabelSet set;
    for (std::size_t i = 0; i < val.size(); ++i) set.add(scores[i], val[i].destroyed);
    return evaluation::roc_auc(set);
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(weight_init_scale > 0.0)) throw ConfigError("weight_init_scale must be > 0");
}

std::vector<double> predict(const NetworkSpec& spec, const NetworkParams& params, std::span<const Example> examples,
                            int jobs, int batch_size) {
    std::vector<double> out;
    out.reserve(examples.size());
    std::vector<const raster::PatchSample*> batch;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(examples[i].sample);
        ForwardOptions opt;
        opt.jobs = jobs;
        const auto r = forward(spec, params, batch, opt);
        out.insert(out.end(), r.scores.begin(), r.scores.end());
    }
    return out;
}

TrainResult train(const NetworkSpec& spec, const TrainConfig& config, std::span<const Example> train_set,
                  std::span<const Example> validation_set) {
    spec.validate();
    config.validate();
    if (train_set.empty()) throw InputError("empty training set");
    std::size_t val_pos = 0;
    for (const auto& e : validation_set) val_pos += e.destroyed ? 1 : 0;
    if (val_pos == 0 || val_pos == validation_set.size())
        throw InputError("validation set needs both classes");

    TrainResult result;
    result.params = init_params(spec, config.weight_init_scale, config.seed);
    if (config.epochs == 0) return result;

    NetworkParams params = result.params;
    double best_auc = -1.0;
    Rng rng(derive_seed(config.seed, 0x7a1));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const raster::PatchSample*> batch;
    std::vector<double> labels;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(train_set[order[i]].sample);
                labels.push_back(train_set[order[i]].destroyed ? 1.0 : 0.0);
            }
            ForwardOptions opt;
            opt.training_mode = true;
            opt.dropout_seed = derive_seed(config.seed, epoch, batch_index);
            opt.jobs = config.jobs;
            ForwardResult fwd;
            try {
                fwd = forward(spec, params, batch, opt);
            } catch (const NumericError& e) {
                throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
            }
            const double loss = bce_loss(fwd.logits, labels);
            if (!std::isfinite(loss))
                throw NumericError("training loss is not finite in epoch " + std::to_string(epoch));
            loss_sum += loss * static_cast<double>(labels.size());

            const ParamSet grad = backward(spec, params, fwd, labels, config.jobs);
            sgd_step(params.weights, grad, config.learning_rate);

            const auto& c = *fwd.cache;
            const double n = static_cast<double>(labels.size());
            const double unbias = n > 1 ? n / (n - 1) : 1.0;
            for (std::size_t u = 0; u < params.bn_running_mean.size(); ++u) {
                params.bn_running_mean[u] =
                    (1 - kRunningMomentum) * params.bn_running_mean[u] + kRunningMomentum * c.batch_mean[u];
                params.bn_running_var[u] =
                    (1 - kRunningMomentum) * params.bn_running_var[u] + kRunningMomentum * c.batch_var[u] * unbias;
            }
        }
        const double epoch_loss = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw NumericError("training loss is not finite in epoch " + std::to_string(epoch));
        double auc;
        try {
            auc = validation_auc(spec, params, validation_set, config.jobs);
        } catch (const NumericError& e) {
            throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
        }
        result.history.push_back({epoch, epoch_loss, auc});
        if (auc > best_auc) {
            best_auc = auc;
            result.params = params;
            result.best_epoch = epoch;
        }
    }
    return result;
}

SearchResult hyperparameter_search(std::span<const Candidate> grid, std::span<const Example> train_set,
                                   std::span<const Example> validation_set) {
    if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
    SearchResult out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        TrainResult r = train(grid[i].spec, grid[i].config, train_set, validation_set);
        double auc = 0.0;
        for (const auto& h : r.history) auc = std::max(auc, h.val_auc);
        if (r.history.empty()) auc = validation_auc(grid[i].spec, r.params, validation_set, grid[i].config.jobs);
        out.val_aucs.push_back(auc);
        bool better = i == 0;
        if (!better) {
            const double best = out.val_aucs[out.best_index];
            better = auc > best || (auc == best && grid[i].spec.parameter_count() <
                                                       grid[out.best_index].spec.parameter_count());
        }
        if (better) {
            out.best_index = i;
            out.best = std::move(r);
        }
    }
    return out;
}

std::vector<Candidate> default_search_grid(const TrainConfig& config, int base_filters) {
    std::vector<Candidate> grid;
    for (int blocks : {2, 3, 4})
        for (int kernel : {3, 5})
            for (double dropout : {0.1, 0.3, 0.5})
                for (int units : {64, 128})
                    for (Activation a : {Activation::ReLU, Activation::Sigmoid}) {
                        NetworkSpec s;
                        s.num_conv_blocks = blocks;
                        s.kernel_size = kernel;
                        s.pool_stride = 2;
                        s.dropout_prob = dropout;
                        s.fc_units = units;
                        s.fc_activation = a;
                        s.base_filters = base_filters;
                        grid.push_back({s, config});
                    }
    return grid;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    csv::Writer w(path, {"epoch", "loss", "val_auc"});
    for (const auto& h : history) {
        w.field(h.epoch).field(h.loss).field(h.val_auc);
        w.end_row();
    }
    w.close();
}

}  // namespace destrack::nn
