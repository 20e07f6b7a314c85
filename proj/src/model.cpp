#include "mtcae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mtcae/activations.hpp"
#include "mtcae/adam.hpp"
#include "mtcae/errors.hpp"
#include "mtcae/metrics.hpp"

namespace mtcae {

MtcAeModel build_model(const std::vector<std::size_t>& channel_dims,
                       const std::vector<PretrainedStack>& stacks,
                       const FineTuneConfig& config, Rng& rng) {
    if (channel_dims.empty()) {
        throw ConfigError("build_model: need at least one channel");
    }
    if (stacks.size() != channel_dims.size()) {
        throw ConfigError("build_model: " + std::to_string(stacks.size()) +
                          " stacks for " + std::to_string(channel_dims.size()) +
                          " channels");
    }

    MtcAeModel model;
    model.channel_dims = channel_dims;
    model.bottleneck_width = config.bottleneck;
    model.class_count = config.class_count;
    model.locals.reserve(channel_dims.size());

    for (std::size_t i = 0; i < channel_dims.size(); ++i) {
        const PretrainedStack& stack = stacks[i];
        if (stack.stages.size() != 2) {
            throw ConfigError("build_model: channel " + std::to_string(i) +
                              " stack must have exactly 2 stages");
        }
        const DenseLayer& enc1 = stack.stages[0].encoder;
        const DenseLayer& enc2 = stack.stages[1].encoder;
        if (enc1.in_dim() != channel_dims[i]) {
            throw ConfigError("build_model: channel " + std::to_string(i) +
                              " stage-1 encoder expects " +
                              std::to_string(enc1.in_dim()) + " inputs, manifest says " +
                              std::to_string(channel_dims[i]));
        }
        if (enc2.in_dim() != enc1.out_dim()) {
            throw ConfigError("build_model: channel " + std::to_string(i) +
                              " stage dimensions do not chain");
        }

        LocalClassifier local;
        local.layer1 = enc1;
        local.layer2 = enc2;
        local.bottleneck = make_dense(config.bottleneck, enc2.out_dim(),
                                      Activation::Elu, rng);
        local.hidden = make_dense(config.local_hidden, config.bottleneck,
                                  Activation::Elu, rng);
        local.output = make_dense(config.class_count, config.local_hidden,
                                  Activation::Softmax, rng);
        model.locals.push_back(std::move(local));
    }

    std::size_t concat_dim = channel_dims.size() * config.bottleneck;
    model.global.hidden = make_dense(config.global_hidden, concat_dim,
                                     Activation::Elu, rng);
    model.global.output = make_dense(config.class_count, config.global_hidden,
                                     Activation::Softmax, rng);
    return model;
}

ForwardCache forward(const MtcAeModel& model, const ChannelBatch& batch) {
    if (batch.size() != model.channel_count()) {
        throw ShapeError("forward: got " + std::to_string(batch.size()) +
                         " channel batches for " +
                         std::to_string(model.channel_count()) + " channels");
    }
    const std::size_t n = model.channel_count();
    const std::size_t rows = batch.empty() ? 0 : batch[0].rows;
    const std::size_t bw = model.bottleneck_width;

    ForwardCache cache;
    cache.local_caches.resize(n);
    cache.concat_bottleneck = Matrix(rows, n * bw);

    for (std::size_t i = 0; i < n; ++i) {
        if (batch[i].rows != rows) {
            throw ShapeError("forward: channel batch row counts differ");
        }
        const LocalClassifier& local = model.locals[i];
        auto& lc = cache.local_caches[i];
        lc[0] = dense_forward(local.layer1, batch[i]);
        lc[1] = dense_forward(local.layer2, lc[0].post_activation);
        lc[2] = dense_forward(local.bottleneck, lc[1].post_activation);
        lc[3] = dense_forward(local.hidden, lc[2].post_activation);
        lc[4] = dense_forward(local.output, lc[3].post_activation);

        const Matrix& bn = lc[2].post_activation;
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(bn.row_ptr(r), bn.row_ptr(r) + bw,
                      cache.concat_bottleneck.row_ptr(r) + i * bw);
        }
    }

    cache.global_hidden_cache =
        dense_forward(model.global.hidden, cache.concat_bottleneck);
    cache.global_output_cache =
        dense_forward(model.global.output, cache.global_hidden_cache.post_activation);
    return cache;
}

double joint_loss(const ForwardCache& cache, const std::vector<int>& labels,
                  double lambda) {
    double global_ce = cross_entropy_mean(cache.global_probs(), labels);
    double local_ce_sum = 0.0;
    for (std::size_t i = 0; i < cache.local_caches.size(); ++i) {
        local_ce_sum += cross_entropy_mean(cache.local_probs(i), labels);
    }
    return lambda * global_ce + (1.0 - lambda) * local_ce_sum;
}

namespace {

// (probs - onehot) * scale / batch at the softmax pre-activation.
Matrix scaled_ce_logit_grad(const Matrix& probs, const std::vector<int>& labels,
                            double scale) {
    Matrix g(probs.rows, probs.cols);
    const double factor = scale / static_cast<double>(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double* p = probs.row_ptr(i);
        double* out = g.row_ptr(i);
        for (std::size_t j = 0; j < probs.cols; ++j) out[j] = factor * p[j];
        out[static_cast<std::size_t>(labels[i])] -= factor;
    }
    return g;
}

}  // namespace

ModelGrads backward(const MtcAeModel& model, const ForwardCache& cache,
                    const std::vector<int>& labels, double lambda) {
    const std::size_t n = model.channel_count();
    const std::size_t bw = model.bottleneck_width;
    const std::size_t rows = cache.concat_bottleneck.rows;
    if (labels.size() != rows) {
        throw ShapeError("backward: label count does not match batch");
    }

    ModelGrads grads;
    grads.locals.resize(n);

    // Global path; with lambda = 0 these gradients are exactly zero.
    Matrix global_logit_grad =
        scaled_ce_logit_grad(cache.global_probs(), labels, lambda);
    grads.global_output = dense_backward(model.global.output,
                                         cache.global_output_cache,
                                         global_logit_grad);
    grads.global_hidden = dense_backward(model.global.hidden,
                                         cache.global_hidden_cache,
                                         grads.global_output.input_grad);
    const Matrix& concat_grad = grads.global_hidden.input_grad;

    for (std::size_t i = 0; i < n; ++i) {
        const LocalClassifier& local = model.locals[i];
        const auto& lc = cache.local_caches[i];
        auto& lg = grads.locals[i];

        Matrix local_logit_grad =
            scaled_ce_logit_grad(cache.local_probs(i), labels, 1.0 - lambda);
        lg[4] = dense_backward(local.output, lc[4], local_logit_grad);
        lg[3] = dense_backward(local.hidden, lc[3], lg[4].input_grad);

        // Local-loss gradient and the global path meet at the bottleneck.
        Matrix bottleneck_grad = lg[3].input_grad;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = concat_grad.row_ptr(r) + i * bw;
            double* dst = bottleneck_grad.row_ptr(r);
            for (std::size_t j = 0; j < bw; ++j) dst[j] += src[j];
        }

        lg[2] = dense_backward(local.bottleneck, lc[2], bottleneck_grad);
        lg[1] = dense_backward(local.layer2, lc[1], lg[2].input_grad);
        lg[0] = dense_backward(local.layer1, lc[0], lg[1].input_grad,
                               /*need_input_grad=*/false);
    }
    return grads;
}

Matrix fuse(const ForwardCache& cache, double gamma, bool local_mean) {
    if (gamma < 0.0 || gamma > 1.0) {
        throw ConfigError("fuse: gamma must be in [0, 1]");
    }
    const Matrix& global_probs = cache.global_probs();
    Matrix fused(global_probs.rows, global_probs.cols);

    const std::size_t n = cache.local_caches.size();
    double local_weight = 1.0 - gamma;
    if (local_mean && n > 0) local_weight /= static_cast<double>(n);

    for (std::size_t k = 0; k < fused.data.size(); ++k) {
        fused.data[k] = gamma * global_probs.data[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix& lp = cache.local_probs(i);
        for (std::size_t k = 0; k < fused.data.size(); ++k) {
            fused.data[k] += local_weight * lp.data[k];
        }
    }
    return fused;
}

std::vector<int> argmax_rows(const Matrix& scores) {
    std::vector<int> labels(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        const double* row = scores.row_ptr(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < scores.cols; ++j) {
            if (row[j] > row[best]) best = j;
        }
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

std::vector<int> predict(const MtcAeModel& model, const ChannelBatch& batch,
                         double gamma, bool local_mean) {
    ForwardCache cache = forward(model, batch);
    return argmax_rows(fuse(cache, gamma, local_mean));
}

namespace {

Matrix gather_rows(const Matrix& data, const std::vector<std::size_t>& order,
                   std::size_t begin, std::size_t end) {
    Matrix out(end - begin, data.cols);
    for (std::size_t i = begin; i < end; ++i) {
        const double* src = data.row_ptr(order[i]);
        std::copy(src, src + data.cols, out.row_ptr(i - begin));
    }
    return out;
}

struct ParamBlock {
    std::vector<double>* values;
    std::string name;
};

std::vector<ParamBlock> parameter_blocks(MtcAeModel& model) {
    std::vector<ParamBlock> blocks;
    for_each_layer(model, [&](DenseLayer& layer, const std::string& name) {
        blocks.push_back({&layer.weights.data, name + ".W"});
        blocks.push_back({&layer.biases, name + ".b"});
    });
    return blocks;
}

std::vector<const std::vector<double>*> gradient_blocks(ModelGrads& grads) {
    std::vector<const std::vector<double>*> blocks;
    for (auto& lg : grads.locals) {
        for (auto& g : lg) {
            blocks.push_back(&g.weight_grad.data);
            blocks.push_back(&g.bias_grad);
        }
    }
    blocks.push_back(&grads.global_hidden.weight_grad.data);
    blocks.push_back(&grads.global_hidden.bias_grad);
    blocks.push_back(&grads.global_output.weight_grad.data);
    blocks.push_back(&grads.global_output.bias_grad);
    return blocks;
}

}  // namespace

void for_each_layer(MtcAeModel& model,
                    const std::function<void(DenseLayer&, const std::string&)>& fn) {
    static const char* kLocalNames[5] = {"layer1", "layer2", "bottleneck",
                                         "hidden", "output"};
    for (std::size_t i = 0; i < model.locals.size(); ++i) {
        LocalClassifier& local = model.locals[i];
        DenseLayer* layers[5] = {&local.layer1, &local.layer2, &local.bottleneck,
                                 &local.hidden, &local.output};
        for (std::size_t k = 0; k < 5; ++k) {
            fn(*layers[k], "local" + std::to_string(i) + "." + kLocalNames[k]);
        }
    }
    fn(model.global.hidden, "global.hidden");
    fn(model.global.output, "global.output");
}

void for_each_layer(const MtcAeModel& model,
                    const std::function<void(const DenseLayer&, const std::string&)>& fn) {
    for_each_layer(const_cast<MtcAeModel&>(model),
                   [&](DenseLayer& layer, const std::string& name) {
                       fn(layer, name);
                   });
}

TrainResult train(const MtcAeModel& model, const LabeledChannelData& train_set,
                  const LabeledChannelData& validation_set,
                  const FineTuneConfig& config) {
    if (train_set.channels.size() != model.channel_count() ||
        validation_set.channels.size() != model.channel_count()) {
        throw ShapeError("train: channel count mismatch");
    }
    if (config.batch_size == 0) {
        throw ConfigError("train: batch size must be >= 1");
    }
    const std::size_t n_train = train_set.labels.size();
    if (n_train == 0) {
        throw ConfigError("train: empty training set");
    }

    TrainResult result;
    result.model = model;
    MtcAeModel working = model;

    std::vector<ParamBlock> blocks = parameter_blocks(working);
    std::vector<AdamState> states;
    states.reserve(blocks.size());
    for (const ParamBlock& b : blocks) states.emplace_back(b.values->size());

    Rng rng(config.seed);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    double best_ua = -1.0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;

        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            std::size_t stop = std::min(start + config.batch_size, n_train);
            ChannelBatch batch(working.channel_count());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                batch[i] = gather_rows(train_set.channels[i], order, start, stop);
            }
            std::vector<int> labels(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                labels[i - start] = train_set.labels[order[i]];
            }

            ForwardCache cache = forward(working, batch);
            double loss = joint_loss(cache, labels, config.lambda);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            }
            loss_sum += loss * static_cast<double>(stop - start);

            ModelGrads grads = backward(working, cache, labels, config.lambda);
            auto grad_blocks = gradient_blocks(grads);
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                adam_step(states[b], *blocks[b].values, *grad_blocks[b], config.lr,
                          blocks[b].name);
            }
            ++batch_index;
        }
        result.history.epoch_loss.push_back(loss_sum /
                                            static_cast<double>(n_train));

        std::vector<int> val_pred =
            predict(working, validation_set.channels, config.gamma,
                    config.fusion_local_mean);
        double ua = compute_metrics(val_pred, validation_set.labels).unweighted_accuracy;
        result.history.val_ua.push_back(ua);
        if (ua > best_ua) {
            best_ua = ua;
            result.model = working;
            result.history.best_epoch = epoch;
            result.history.best_val_ua = ua;
        }
    }
    return result;
}

}  // namespace mtcae
