#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mtcae/config.hpp"
#include "mtcae/dataio.hpp"
#include "mtcae/metrics.hpp"
#include "mtcae/model.hpp"

namespace mtcae {

struct FoldResult {
    std::string test_speaker;
    std::string validation_speaker;
    bool completed = false;
    std::string error;
    Metrics metrics;
    std::size_t best_epoch = 0;
    TrainHistory history;
};

struct RunReport {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::vector<FoldResult> folds;
    bool has_pooled = false;
    Metrics pooled;
    double aggregate_ua = 0.0;  // unweighted mean of fold UAs
    double wall_clock_s = 0.0;
};

// Full leave-one-speaker-out pipeline: per fold, standardize on the training
// split, pretrain per-channel stacks, build and fine-tune the model, evaluate
// fused predictions on the held-out speaker. Writes report.json and per-fold
// checkpoints to the config's out directory.
RunReport run_loso(const ExperimentConfig& config);

struct GradcheckReport {
    struct Entry {
        double lambda;
        std::string block;
        double max_rel_error;
    };
    std::vector<Entry> entries;
    double max_rel_error = 0.0;
    double tolerance = 1e-5;
    bool pass = false;
};

// Joint-loss gradient check on a built-in 3-channel toy model at
// lambda in {0, 0.1, 0.5, 1}.
GradcheckReport run_gradcheck();

nlohmann::json metrics_to_json(const Metrics& metrics);
nlohmann::json config_to_json(const ExperimentConfig& config);
nlohmann::json report_to_json(const RunReport& report);
nlohmann::json gradcheck_to_json(const GradcheckReport& report);

// Deterministic seed derivation for fold / stage substreams.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

}  // namespace mtcae
