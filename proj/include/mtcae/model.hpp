#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mtcae/dense.hpp"
#include "mtcae/matrix.hpp"
#include "mtcae/rng.hpp"
#include "mtcae/sdae.hpp"

namespace mtcae {

// One channel's five-layer stack. layer1/layer2 start from the SDAE encoders;
// the top three layers are randomly initialized.
struct LocalClassifier {
    DenseLayer layer1;      // [sdae_hidden x d_i], ELU
    DenseLayer layer2;      // [sdae_hidden x sdae_hidden], ELU
    DenseLayer bottleneck;  // [B x sdae_hidden], ELU
    DenseLayer hidden;      // [local_hidden x B], ELU
    DenseLayer output;      // [classes x local_hidden], softmax
};

struct GlobalClassifier {
    DenseLayer hidden;  // [global_hidden x N*B], ELU
    DenseLayer output;  // [classes x global_hidden], softmax
};

struct MtcAeModel {
    std::vector<LocalClassifier> locals;
    GlobalClassifier global;
    std::vector<std::size_t> channel_dims;
    std::size_t bottleneck_width = 30;
    std::size_t class_count = 4;

    std::size_t channel_count() const { return locals.size(); }
};

struct FineTuneConfig {
    double lambda = 0.1;
    double gamma = 0.95;
    double lr = 3e-4;
    std::size_t epochs = 1000;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    std::size_t bottleneck = 30;
    std::size_t local_hidden = 100;
    std::size_t global_hidden = 1000;
    std::size_t class_count = 4;
    bool fusion_local_mean = false;
};

struct ForwardCache {
    std::vector<std::array<LayerCache, 5>> local_caches;
    Matrix concat_bottleneck;  // [batch x N*B]
    LayerCache global_hidden_cache;
    LayerCache global_output_cache;

    const Matrix& local_probs(std::size_t i) const {
        return local_caches[i][4].post_activation;
    }
    const Matrix& global_probs() const {
        return global_output_cache.post_activation;
    }
};

struct ModelGrads {
    std::vector<std::array<DenseGrads, 5>> locals;
    DenseGrads global_hidden;
    DenseGrads global_output;
};

// One matrix per channel, all with the same row count.
using ChannelBatch = std::vector<Matrix>;

struct LabeledChannelData {
    ChannelBatch channels;
    std::vector<int> labels;
};

struct TrainHistory {
    std::vector<double> epoch_loss;
    std::vector<double> val_ua;
    std::size_t best_epoch = 0;
    double best_val_ua = 0.0;
};

struct TrainResult {
    MtcAeModel model;  // snapshot with the best validation UA
    TrainHistory history;
};

// Copies the SDAE encoder weights into layer1/layer2 and Glorot-initializes
// everything above them plus the global classifier.
MtcAeModel build_model(const std::vector<std::size_t>& channel_dims,
                       const std::vector<PretrainedStack>& stacks,
                       const FineTuneConfig& config, Rng& rng);

ForwardCache forward(const MtcAeModel& model, const ChannelBatch& batch);

// lambda * CE_global + (1 - lambda) * sum_i CE_local_i, batch-mean CEs.
double joint_loss(const ForwardCache& cache, const std::vector<int>& labels,
                  double lambda);

ModelGrads backward(const MtcAeModel& model, const ForwardCache& cache,
                    const std::vector<int>& labels, double lambda);

// gamma * q_global + (1 - gamma) * sum_i q_local_i (unnormalized); with
// local_mean the local term is averaged over channels instead of summed.
Matrix fuse(const ForwardCache& cache, double gamma, bool local_mean = false);

// Argmax of the fused scores, ties to the lowest class index.
std::vector<int> predict(const MtcAeModel& model, const ChannelBatch& batch,
                         double gamma, bool local_mean = false);

// Per-row argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& scores);

// Mini-batch Adam on the joint objective with per-epoch validation selection.
TrainResult train(const MtcAeModel& model, const LabeledChannelData& train_set,
                  const LabeledChannelData& validation_set,
                  const FineTuneConfig& config);

// Visits every layer in canonical (checkpoint) order.
void for_each_layer(MtcAeModel& model,
                    const std::function<void(DenseLayer&, const std::string&)>& fn);
void for_each_layer(const MtcAeModel& model,
                    const std::function<void(const DenseLayer&, const std::string&)>& fn);

// Binary checkpoint: "MTCA" magic, version, header, f64 parameter blocks.
void save_checkpoint(const MtcAeModel& model, const std::filesystem::path& path);
MtcAeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mtcae
