#include "mtcae/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mtcae/errors.hpp"
#include "mtcae/rng.hpp"

namespace mtcae {

namespace {

int label_index(const std::string& name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (name == kClassNames[i]) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& field, std::size_t line_no,
                    std::size_t col) {
    double value = 0.0;
    std::string t = trim(field);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError("non-numeric feature '" + t + "' at line " +
                         std::to_string(line_no) + ", column " +
                         std::to_string(col));
    }
    return value;
}

}  // namespace

Dataset load_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open feature file: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty feature file: " + path.string());
    }
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 4 || trim(header[0]) != "utterance_id" ||
        trim(header[1]) != "speaker_id" || trim(header[2]) != "label") {
        throw ParseError("bad header at line 1: expected "
                         "utterance_id,speaker_id,label,f0,...");
    }
    const std::size_t dim = header.size() - 3;

    Dataset ds;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != dim + 3) {
            throw ParseError("ragged row at line " + std::to_string(line_no) +
                             ": got " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(dim + 3));
        }
        int label = label_index(trim(fields[2]));
        if (label < 0) {
            throw ParseError("unknown label '" + trim(fields[2]) + "' at line " +
                             std::to_string(line_no));
        }
        ds.utterance_ids.push_back(trim(fields[0]));
        ds.speaker_ids.push_back(trim(fields[1]));
        ds.labels.push_back(label);
        for (std::size_t j = 0; j < dim; ++j) {
            values.push_back(parse_double(fields[3 + j], line_no, j));
        }
    }
    ds.features.rows = ds.labels.size();
    ds.features.cols = dim;
    ds.features.data = std::move(values);
    return ds;
}

void save_features_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw ParseError("cannot open feature file for writing: " + path.string());
    }
    out << "utterance_id,speaker_id,label";
    for (std::size_t j = 0; j < dataset.dim(); ++j) out << ",f" << j;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << dataset.utterance_ids[i] << ',' << dataset.speaker_ids[i] << ','
            << kClassNames[static_cast<std::size_t>(dataset.labels[i])];
        const double* row = dataset.features.row_ptr(i);
        for (std::size_t j = 0; j < dataset.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) {
        throw ParseError("failed to write feature file: " + path.string());
    }
}

std::size_t ChannelManifest::total_columns() const {
    std::size_t total = 0;
    for (const Channel& c : channels) total += c.columns.size();
    return total;
}

std::vector<std::size_t> ChannelManifest::channel_dims() const {
    std::vector<std::size_t> dims;
    dims.reserve(channels.size());
    for (const Channel& c : channels) dims.push_back(c.columns.size());
    return dims;
}

void ChannelManifest::validate() const {
    if (channels.empty()) {
        throw ManifestError("manifest has no channels");
    }
    std::map<std::size_t, const std::string*> seen;
    std::size_t max_col = 0;
    for (const Channel& c : channels) {
        if (c.columns.empty()) {
            throw ManifestError("channel '" + c.name + "' has no columns");
        }
        for (std::size_t col : c.columns) {
            auto [it, inserted] = seen.emplace(col, &c.name);
            if (!inserted) {
                throw ManifestError("column " + std::to_string(col) +
                                    " assigned to both '" + *it->second +
                                    "' and '" + c.name + "'");
            }
            max_col = std::max(max_col, col);
        }
    }
    for (std::size_t col = 0; col <= max_col; ++col) {
        if (!seen.count(col)) {
            throw ManifestError("column " + std::to_string(col) +
                                " not covered by any channel");
        }
    }
}

ChannelManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ManifestError("cannot open manifest: " + path.string());
    }
    ChannelManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t colon = t.find(':');
        if (colon == std::string::npos) {
            throw ManifestError("missing ':' in manifest line " +
                                std::to_string(line_no));
        }
        ChannelManifest::Channel channel;
        channel.name = trim(t.substr(0, colon));
        if (channel.name.empty()) {
            throw ManifestError("empty channel name at manifest line " +
                                std::to_string(line_no));
        }
        std::stringstream spec(t.substr(colon + 1));
        std::string item;
        while (std::getline(spec, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            std::size_t dash = item.find('-');
            try {
                if (dash == std::string::npos) {
                    channel.columns.push_back(std::stoul(item));
                } else {
                    std::size_t lo = std::stoul(trim(item.substr(0, dash)));
                    std::size_t hi = std::stoul(trim(item.substr(dash + 1)));
                    if (hi < lo) {
                        throw ManifestError("descending range '" + item +
                                            "' at manifest line " +
                                            std::to_string(line_no));
                    }
                    for (std::size_t c = lo; c <= hi; ++c) {
                        channel.columns.push_back(c);
                    }
                }
            } catch (const std::logic_error&) {
                throw ManifestError("bad column spec '" + item +
                                    "' at manifest line " + std::to_string(line_no));
            }
        }
        manifest.channels.push_back(std::move(channel));
    }
    manifest.validate();
    return manifest;
}

void save_manifest(const ChannelManifest& manifest,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw ManifestError("cannot open manifest for writing: " + path.string());
    }
    for (const auto& channel : manifest.channels) {
        out << channel.name << ":";
        // Emit maximal runs as ranges.
        std::size_t i = 0;
        bool first = true;
        while (i < channel.columns.size()) {
            std::size_t j = i;
            while (j + 1 < channel.columns.size() &&
                   channel.columns[j + 1] == channel.columns[j] + 1) {
                ++j;
            }
            out << (first ? " " : ",");
            if (j == i) {
                out << channel.columns[i];
            } else {
                out << channel.columns[i] << '-' << channel.columns[j];
            }
            first = false;
            i = j + 1;
        }
        out << "\n";
    }
}

Matrix channel_view(const Matrix& features, const ChannelManifest& manifest,
                    std::size_t i) {
    if (i >= manifest.channel_count()) {
        throw std::out_of_range("channel_view: channel index out of range");
    }
    const auto& cols = manifest.channels[i].columns;
    Matrix out(features.rows, cols.size());
    for (std::size_t r = 0; r < features.rows; ++r) {
        const double* src = features.row_ptr(r);
        double* dst = out.row_ptr(r);
        for (std::size_t j = 0; j < cols.size(); ++j) dst[j] = src[cols[j]];
    }
    return out;
}

ChannelBatch split_channels(const Matrix& features,
                            const ChannelManifest& manifest) {
    if (manifest.total_columns() != features.cols) {
        throw ManifestError("manifest covers " +
                            std::to_string(manifest.total_columns()) +
                            " columns but features have " +
                            std::to_string(features.cols));
    }
    ChannelBatch batch;
    batch.reserve(manifest.channel_count());
    for (std::size_t i = 0; i < manifest.channel_count(); ++i) {
        batch.push_back(channel_view(features, manifest, i));
    }
    return batch;
}

Standardizer fit_standardizer(const Matrix& train_features) {
    if (train_features.rows == 0) {
        throw ConfigError("fit_standardizer: no training rows");
    }
    const std::size_t d = train_features.cols;
    const auto n = static_cast<double>(train_features.rows);
    Standardizer std_;
    std_.mean.assign(d, 0.0);
    std_.stddev.assign(d, 0.0);
    for (std::size_t r = 0; r < train_features.rows; ++r) {
        const double* row = train_features.row_ptr(r);
        for (std::size_t j = 0; j < d; ++j) std_.mean[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) std_.mean[j] /= n;
    for (std::size_t r = 0; r < train_features.rows; ++r) {
        const double* row = train_features.row_ptr(r);
        for (std::size_t j = 0; j < d; ++j) {
            double dev = row[j] - std_.mean[j];
            std_.stddev[j] += dev * dev;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        std_.stddev[j] = std::max(std::sqrt(std_.stddev[j] / n), 1e-8);
    }
    return std_;
}

Matrix apply_standardizer(const Standardizer& std_, const Matrix& features) {
    if (features.cols != std_.mean.size()) {
        throw ShapeError("apply_standardizer: column count mismatch");
    }
    Matrix out(features.rows, features.cols);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const double* src = features.row_ptr(r);
        double* dst = out.row_ptr(r);
        for (std::size_t j = 0; j < features.cols; ++j) {
            dst[j] = (src[j] - std_.mean[j]) / std_.stddev[j];
        }
    }
    return out;
}

void save_standardizer(const Standardizer& std_,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw ParseError("cannot open standardizer file for writing: " +
                         path.string());
    }
    char buf[64];
    for (std::size_t j = 0; j < std_.mean.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g", std_.mean[j],
                      std_.stddev[j]);
        out << buf << "\n";
    }
}

Standardizer load_standardizer(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open standardizer file: " + path.string());
    }
    Standardizer std_;
    double mean = 0.0;
    double stddev = 0.0;
    while (in >> mean >> stddev) {
        std_.mean.push_back(mean);
        std_.stddev.push_back(stddev);
    }
    if (std_.mean.empty()) {
        throw ParseError("empty standardizer file: " + path.string());
    }
    return std_;
}

FoldPlan make_loso_folds(const Dataset& dataset) {
    std::set<std::string> distinct(dataset.speaker_ids.begin(),
                                   dataset.speaker_ids.end());
    if (distinct.size() < 3) {
        throw ConfigError("make_loso_folds: need at least 3 distinct speakers, got " +
                          std::to_string(distinct.size()));
    }
    std::vector<std::string> speakers(distinct.begin(), distinct.end());
    FoldPlan plan;
    for (std::size_t i = 0; i < speakers.size(); ++i) {
        FoldPlan::Fold fold;
        fold.test_speaker = speakers[i];
        fold.validation_speaker = speakers[(i + 1) % speakers.size()];
        for (std::size_t j = 0; j < speakers.size(); ++j) {
            if (j != i && j != (i + 1) % speakers.size()) {
                fold.train_speakers.push_back(speakers[j]);
            }
        }
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

std::pair<Dataset, ChannelManifest> synth_generate(const SynthSpec& spec) {
    if (spec.channels == 0 || spec.dims_per_channel == 0 ||
        spec.samples_per_class == 0 || spec.speakers == 0) {
        throw ConfigError("synth_generate: all counts must be >= 1");
    }
    if (spec.separation < 0.0 || spec.noise < 0.0) {
        throw ConfigError("synth_generate: separation and noise must be >= 0");
    }

    const std::size_t dim = spec.channels * spec.dims_per_channel;
    const std::size_t n = spec.samples_per_class * kClassNames.size();
    Rng rng(spec.seed);

    // One mean vector per (class, channel), drawn before any samples.
    std::vector<std::vector<double>> class_means(kClassNames.size());
    for (auto& mean : class_means) {
        mean.resize(dim);
        for (double& v : mean) v = spec.separation * rng.gaussian();
    }

    Dataset ds;
    ds.features = Matrix(n, dim);
    ds.labels.reserve(n);
    char buf[32];
    std::size_t idx = 0;
    for (std::size_t c = 0; c < kClassNames.size(); ++c) {
        for (std::size_t k = 0; k < spec.samples_per_class; ++k, ++idx) {
            double* row = ds.features.row_ptr(idx);
            for (std::size_t j = 0; j < dim; ++j) {
                row[j] = class_means[c][j] + spec.noise * rng.gaussian();
            }
            ds.labels.push_back(static_cast<int>(c));
            std::snprintf(buf, sizeof(buf), "utt%05zu", idx);
            ds.utterance_ids.emplace_back(buf);
            std::snprintf(buf, sizeof(buf), "spk%02zu", idx % spec.speakers);
            ds.speaker_ids.emplace_back(buf);
        }
    }

    ChannelManifest manifest;
    for (std::size_t i = 0; i < spec.channels; ++i) {
        ChannelManifest::Channel channel;
        channel.name = "synth" + std::to_string(i);
        for (std::size_t j = 0; j < spec.dims_per_channel; ++j) {
            channel.columns.push_back(i * spec.dims_per_channel + j);
        }
        manifest.channels.push_back(std::move(channel));
    }
    return {std::move(ds), std::move(manifest)};
}

}  // namespace mtcae
