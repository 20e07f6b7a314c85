#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mtcae/dataio.hpp"
#include "mtcae/model.hpp"
#include "mtcae/sdae.hpp"

namespace mtcae {

// Experiment settings; every key has a default matching the reference
// network setting, so a minimal (even empty) config file is valid.
struct ExperimentConfig {
    std::string features_path;
    std::string manifest_path;
    std::optional<SynthSpec> synth;

    DaeConfig sdae;            // hidden=400, epochs=200, lr=3e-4, batch=64,
                               // corruption=0.2, beta=1e-4
    FineTuneConfig finetune;   // bottleneck=30, local_hidden=100,
                               // global_hidden=1000, epochs=1000, lr=3e-4,
                               // batch=64, lambda=0.1, gamma=0.95

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    bool parallel_channels = true;
    bool parallel_folds = false;
};

// Flat `key = value` file with `[section]` headers; unknown sections or keys
// are rejected. Missing keys keep their defaults.
ExperimentConfig load_config(const std::filesystem::path& path);

// Parses from an in-memory string (same format).
ExperimentConfig parse_config(const std::string& text);

}  // namespace mtcae
