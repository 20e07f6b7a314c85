#include "mtcae/sdae.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "mtcae/activations.hpp"
#include "mtcae/adam.hpp"
#include "mtcae/errors.hpp"

namespace mtcae {

void corrupt(std::span<double> x, const CorruptionSpec& spec, Rng& rng) {
    if (spec.rate < 0.0 || spec.rate > 1.0) {
        throw ConfigError("corrupt: rate must be in [0, 1]");
    }
    const std::size_t dim = x.size();
    const auto n_zero =
        static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(dim)));
    if (n_zero == 0) return;

    // Partial Fisher-Yates over an index pool: first n_zero picks are a
    // uniform sample without replacement.
    std::vector<std::size_t> pool(dim);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t k = 0; k < n_zero; ++k) {
        std::size_t j = k + rng.index(dim - k);
        std::swap(pool[k], pool[j]);
        x[pool[k]] = 0.0;
    }
}

std::pair<Matrix, Matrix> dae_forward(const DenoisingAutoencoder& dae,
                                      const Matrix& x_corrupted) {
    LayerCache enc = dense_forward(dae.encoder, x_corrupted);
    LayerCache dec = dense_forward(dae.decoder, enc.post_activation);
    return {std::move(enc.post_activation), std::move(dec.post_activation)};
}

double dae_loss(const DenoisingAutoencoder& dae, const Matrix& x_clean,
                const Matrix& reconstruction, double beta) {
    if (x_clean.rows != reconstruction.rows || x_clean.cols != reconstruction.cols) {
        throw ShapeError("dae_loss: reconstruction shape mismatch");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < x_clean.data.size(); ++k) {
        double d = x_clean.data[k] - reconstruction.data[k];
        total += d * d;
    }
    double mse = x_clean.rows == 0 ? 0.0 : total / static_cast<double>(x_clean.rows);
    return mse + l2_penalty({&dae.encoder.weights, &dae.decoder.weights}, beta);
}

Matrix encode(const DenoisingAutoencoder& dae, const Matrix& x_clean) {
    return dense_forward(dae.encoder, x_clean).post_activation;
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

}  // namespace

DaeTrainResult train_dae(const Matrix& data, const DaeConfig& config, Rng& rng) {
    if (data.rows == 0 || data.cols == 0) {
        throw ConfigError("train_dae: empty training data");
    }
    if (config.batch_size == 0) {
        throw ConfigError("train_dae: batch size must be >= 1");
    }

    DaeTrainResult result;
    DenoisingAutoencoder& dae = result.dae;
    dae.encoder = make_dense(config.hidden, data.cols, Activation::Elu, rng);
    dae.decoder = make_dense(data.cols, config.hidden, Activation::Elu, rng);
    dae.encoder.alpha = config.alpha;
    dae.decoder.alpha = config.alpha;

    AdamState enc_w_state(dae.encoder.weights.size());
    AdamState enc_b_state(dae.encoder.biases.size());
    AdamState dec_w_state(dae.decoder.weights.size());
    AdamState dec_b_state(dae.decoder.biases.size());

    std::vector<std::size_t> order(data.rows);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sq_dist = 0.0;

        for (std::size_t start = 0; start < data.rows; start += config.batch_size) {
            std::size_t stop = std::min(start + config.batch_size, data.rows);
            Matrix clean = gather_rows(data, order, start, stop);
            Matrix corrupted = clean;
            for (std::size_t i = 0; i < corrupted.rows; ++i) {
                corrupt({corrupted.row_ptr(i), corrupted.cols}, config.corruption,
                        rng);
            }

            LayerCache enc_cache = dense_forward(dae.encoder, corrupted);
            LayerCache dec_cache = dense_forward(dae.decoder, enc_cache.post_activation);
            const Matrix& recon = dec_cache.post_activation;

            const auto batch = static_cast<double>(clean.rows);
            double sq_dist = 0.0;
            Matrix recon_grad(recon.rows, recon.cols);
            for (std::size_t k = 0; k < recon.data.size(); ++k) {
                double d = recon.data[k] - clean.data[k];
                sq_dist += d * d;
                recon_grad.data[k] = 2.0 * d / batch;
            }
            epoch_sq_dist += sq_dist;

            double loss = sq_dist / batch +
                          l2_penalty({&dae.encoder.weights, &dae.decoder.weights},
                                     config.beta);
            if (!std::isfinite(loss)) {
                throw NumericError("train_dae: non-finite loss at epoch " +
                                   std::to_string(epoch));
            }

            DenseGrads dec_grads = dense_backward(dae.decoder, dec_cache, recon_grad);
            DenseGrads enc_grads = dense_backward(dae.encoder, enc_cache,
                                                  dec_grads.input_grad,
                                                  /*need_input_grad=*/false);
            for (std::size_t k = 0; k < dae.encoder.weights.data.size(); ++k) {
                enc_grads.weight_grad.data[k] +=
                    2.0 * config.beta * dae.encoder.weights.data[k];
            }
            for (std::size_t k = 0; k < dae.decoder.weights.data.size(); ++k) {
                dec_grads.weight_grad.data[k] +=
                    2.0 * config.beta * dae.decoder.weights.data[k];
            }

            adam_step(enc_w_state, dae.encoder.weights.data,
                      enc_grads.weight_grad.data, config.lr, "dae.encoder.W");
            adam_step(enc_b_state, dae.encoder.biases, enc_grads.bias_grad,
                      config.lr, "dae.encoder.b");
            adam_step(dec_w_state, dae.decoder.weights.data,
                      dec_grads.weight_grad.data, config.lr, "dae.decoder.W");
            adam_step(dec_b_state, dae.decoder.biases, dec_grads.bias_grad,
                      config.lr, "dae.decoder.b");
        }

        result.epoch_mse.push_back(epoch_sq_dist / static_cast<double>(data.rows));
    }
    return result;
}

PretrainedStack pretrain_stack(const Matrix& data, const DaeConfig& config,
                               Rng& rng, std::size_t channel_index) {
    PretrainedStack stack;
    stack.channel_index = channel_index;
    stack.stages.push_back(train_dae(data, config, rng).dae);
    Matrix hidden = encode(stack.stages[0], data);
    stack.stages.push_back(train_dae(hidden, config, rng).dae);
    return stack;
}

std::vector<PretrainedStack> pretrain_all(const std::vector<Matrix>& channel_data,
                                          const DaeConfig& config,
                                          std::uint64_t master_seed,
                                          bool parallel) {
    const std::size_t n = channel_data.size();
    std::vector<PretrainedStack> stacks(n);

    auto run_channel = [&](std::size_t i) {
        Rng rng = Rng::substream(master_seed, i);
        stacks[i] = pretrain_stack(channel_data[i], config, rng, i);
    };

    if (!parallel || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) run_channel(i);
        return stacks;
    }

    std::size_t workers = std::min<std::size_t>(
        n, std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                if (failed.load()) return;
                try {
                    run_channel(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return stacks;
}

}  // namespace mtcae
