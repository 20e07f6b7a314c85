#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mtcae/dense.hpp"
#include "mtcae/matrix.hpp"
#include "mtcae/rng.hpp"

namespace mtcae {

// Exact-count masking noise: floor(rate * dim) positions zeroed.
struct CorruptionSpec {
    double rate = 0.2;
};

// Untied encoder/decoder pair, both ELU.
struct DenoisingAutoencoder {
    DenseLayer encoder;  // [hidden x in]
    DenseLayer decoder;  // [in x hidden]
};

struct DaeConfig {
    std::size_t hidden = 400;
    std::size_t epochs = 200;
    double lr = 3e-4;
    std::size_t batch_size = 64;
    CorruptionSpec corruption{0.2};
    double beta = 1e-4;
    double alpha = 1.0;
};

// Two greedily trained stages; stage 2 is trained on stage 1's encodings.
struct PretrainedStack {
    std::vector<DenoisingAutoencoder> stages;
    std::size_t channel_index = 0;
};

struct DaeTrainResult {
    DenoisingAutoencoder dae;
    // Per-epoch mean of the training-batch reconstruction MSE (pre-update).
    std::vector<double> epoch_mse;
};

// Zeroes exactly floor(rate * dim) distinct positions, chosen uniformly
// without replacement.
void corrupt(std::span<double> x, const CorruptionSpec& spec, Rng& rng);

// (hidden, reconstruction) for a batch of already-corrupted inputs.
std::pair<Matrix, Matrix> dae_forward(const DenoisingAutoencoder& dae,
                                      const Matrix& x_corrupted);

// Batch-mean squared reconstruction distance plus the L2 weight penalty.
double dae_loss(const DenoisingAutoencoder& dae, const Matrix& x_clean,
                const Matrix& reconstruction, double beta);

// Mini-batch Adam on the reconstruction objective, corruption resampled
// freshly every epoch.
DaeTrainResult train_dae(const Matrix& data, const DaeConfig& config, Rng& rng);

// Encoder applied to clean (uncorrupted) inputs.
Matrix encode(const DenoisingAutoencoder& dae, const Matrix& x_clean);

// Greedy two-stage pretraining for one channel.
PretrainedStack pretrain_stack(const Matrix& data, const DaeConfig& config,
                               Rng& rng, std::size_t channel_index = 0);

// One stack per channel; each channel draws from an independent substream of
// `master_seed`, so parallel and serial execution are bit-identical.
std::vector<PretrainedStack> pretrain_all(const std::vector<Matrix>& channel_data,
                                          const DaeConfig& config,
                                          std::uint64_t master_seed,
                                          bool parallel);

}  // namespace mtcae
