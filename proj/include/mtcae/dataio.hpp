#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mtcae/matrix.hpp"
#include "mtcae/model.hpp"

namespace mtcae {

// Fixed label order; reports are bit-reproducible against it.
inline constexpr std::array<const char*, 4> kClassNames = {"happy", "angry",
                                                           "sad", "neutral"};

struct Dataset {
    Matrix features;  // [N x D]
    std::vector<int> labels;
    std::vector<std::string> speaker_ids;
    std::vector<std::string> utterance_ids;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }
};

// Ordered partition of feature columns into named LLD channels.
struct ChannelManifest {
    struct Channel {
        std::string name;
        std::vector<std::size_t> columns;
    };
    std::vector<Channel> channels;

    std::size_t channel_count() const { return channels.size(); }
    std::size_t total_columns() const;
    std::vector<std::size_t> channel_dims() const;

    // Checks the channels form an exact partition of 0..total-1.
    void validate() const;
};

// Per-column z-scoring, fit on training rows only.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-8
};

struct FoldPlan {
    struct Fold {
        std::string test_speaker;
        std::string validation_speaker;
        std::vector<std::string> train_speakers;
    };
    std::vector<Fold> folds;
};

struct SynthSpec {
    std::size_t channels = 3;
    std::size_t dims_per_channel = 5;
    std::size_t samples_per_class = 50;
    std::size_t speakers = 10;
    double separation = 1.0;
    double noise = 1.0;
    std::uint64_t seed = 0;
};

// CSV with header `utterance_id,speaker_id,label,f0,...`; labels are the
// class names from kClassNames.
Dataset load_features_csv(const std::filesystem::path& path);
void save_features_csv(const Dataset& dataset, const std::filesystem::path& path);

// Text manifest: one `name: columns` record per line, columns given as
// comma-separated indices and inclusive ranges (e.g. `mfcc0: 21-41,63`).
ChannelManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const ChannelManifest& manifest,
                   const std::filesystem::path& path);

// Columns of channel i extracted in manifest order.
Matrix channel_view(const Matrix& features, const ChannelManifest& manifest,
                    std::size_t i);

// All channels at once.
ChannelBatch split_channels(const Matrix& features,
                            const ChannelManifest& manifest);

Standardizer fit_standardizer(const Matrix& train_features);
Matrix apply_standardizer(const Standardizer& std, const Matrix& features);

// Sidecar text format so checkpoints can be evaluated without refitting.
void save_standardizer(const Standardizer& std, const std::filesystem::path& path);
Standardizer load_standardizer(const std::filesystem::path& path);

// One fold per speaker; the validation speaker is the next speaker in sorted
// order, so folds are deterministic.
FoldPlan make_loso_folds(const Dataset& dataset);

// Class-conditional Gaussian features with round-robin pseudo-speakers and a
// contiguous per-channel manifest.
std::pair<Dataset, ChannelManifest> synth_generate(const SynthSpec& spec);

}  // namespace mtcae
