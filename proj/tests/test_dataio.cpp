#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mtcae/dataio.hpp"
#include "mtcae/errors.hpp"

using namespace mtcae;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream f(p);
    f << content;
    return p;
}

}  // namespace

TEST_CASE("load_features_csv parses a toy file") {
    fs::path p = write_temp("mtcae_toy.csv",
                            "utterance_id,speaker_id,label,f0,f1,f2,f3\n"
                            "u1,spkA,happy,1.0,2.0,3.0,4.0\n"
                            "u2,spkB,sad,-1,0,0.5,2e-3\n"
                            "u3,spkA,neutral,0,0,0,0\n");
    Dataset d = load_features_csv(p);
    CHECK(d.size() == 3);
    CHECK(d.dim() == 4);
    CHECK(d.labels == std::vector<int>{0, 2, 3});
    CHECK(d.speaker_ids == std::vector<std::string>{"spkA", "spkB", "spkA"});
    CHECK(d.utterance_ids[1] == "u2");
    CHECK(d.features(1, 3) == doctest::Approx(2e-3));
    fs::remove(p);
}

TEST_CASE("load_features_csv errors carry line numbers") {
    fs::path p = write_temp("mtcae_badlabel.csv",
                            "utterance_id,speaker_id,label,f0\n"
                            "u1,s1,happy,1\n"
                            "u2,s1,angry,2\n"
                            "u3,s2,sad,3\n"
                            "u4,s2,bored,4\n");
    CHECK_THROWS_WITH_AS(load_features_csv(p), doctest::Contains("5"), ParseError);
    fs::remove(p);

    fs::path ragged = write_temp("mtcae_ragged.csv",
                                 "utterance_id,speaker_id,label,f0,f1\n"
                                 "u1,s1,happy,1,2\n"
                                 "u2,s1,sad,3\n");
    CHECK_THROWS_WITH_AS(load_features_csv(ragged), doctest::Contains("3"),
                         ParseError);
    fs::remove(ragged);

    fs::path nonnum = write_temp("mtcae_nonnum.csv",
                                 "utterance_id,speaker_id,label,f0\n"
                                 "u1,s1,happy,abc\n");
    CHECK_THROWS_AS(load_features_csv(nonnum), ParseError);
    fs::remove(nonnum);
}

TEST_CASE("features CSV round-trips through save/load") {
    SynthSpec spec;
    spec.channels = 2;
    spec.dims_per_channel = 3;
    spec.samples_per_class = 4;
    spec.speakers = 3;
    spec.seed = 5;
    auto [d, manifest] = synth_generate(spec);
    fs::path p = fs::temp_directory_path() / "mtcae_roundtrip.csv";
    save_features_csv(d, p);
    Dataset d2 = load_features_csv(p);
    CHECK(d2.labels == d.labels);
    CHECK(d2.speaker_ids == d.speaker_ids);
    CHECK(d2.utterance_ids == d.utterance_ids);
    CHECK(d2.features.data == d.features.data);  // %.17g is lossless for doubles
    fs::remove(p);
}

TEST_CASE("manifest validation accepts partitions and rejects overlap/gap") {
    ChannelManifest ok;
    ok.channels = {{"a", {0, 1}}, {"b", {2}}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.total_columns() == 3);
    CHECK(ok.channel_dims() == std::vector<std::size_t>{2, 1});

    ChannelManifest overlap;
    overlap.channels = {{"a", {0, 1}}, {"b", {1, 2}}};
    CHECK_THROWS_WITH_AS(overlap.validate(), doctest::Contains("1"), ManifestError);

    ChannelManifest gap;
    gap.channels = {{"a", {0}}, {"b", {2}}};
    CHECK_THROWS_AS(gap.validate(), ManifestError);

    ChannelManifest empty_channel;
    empty_channel.channels = {{"a", {0}}, {"b", {}}};
    CHECK_THROWS_AS(empty_channel.validate(), ManifestError);
}

TEST_CASE("manifest text format round-trips, including ranges") {
    ChannelManifest m;
    m.channels = {{"mfcc0", {0, 1, 2, 5}}, {"pitch", {3, 4, 6}}};
    fs::path p = fs::temp_directory_path() / "mtcae_manifest.txt";
    save_manifest(m, p);
    ChannelManifest loaded = load_manifest(p);
    REQUIRE(loaded.channel_count() == 2);
    CHECK(loaded.channels[0].name == "mfcc0");
    CHECK(loaded.channels[0].columns == std::vector<std::size_t>{0, 1, 2, 5});
    CHECK(loaded.channels[1].columns == std::vector<std::size_t>{3, 4, 6});
    fs::remove(p);

    fs::path ranged = write_temp("mtcae_manifest_rng.txt",
                                 "a: 0-2,5\n"
                                 "b: 3,4\n");
    ChannelManifest r = load_manifest(ranged);
    CHECK(r.channels[0].columns == std::vector<std::size_t>{0, 1, 2, 5});
    fs::remove(ranged);

    fs::path broken = write_temp("mtcae_manifest_bad.txt", "a: 0,1\nb: 1,2\n");
    CHECK_THROWS_AS(load_manifest(broken), ManifestError);
    fs::remove(broken);
}

TEST_CASE("channel_view preserves listed column order and loses nothing") {
    Matrix features(2, 4);
    for (std::size_t i = 0; i < features.size(); ++i) {
        features.data[i] = static_cast<double>(i);
    }
    ChannelManifest m;
    m.channels = {{"a", {2, 0}}, {"b", {1, 3}}};
    Matrix v0 = channel_view(features, m, 0);
    CHECK(v0.cols == 2);
    CHECK(v0(0, 0) == features(0, 2));
    CHECK(v0(0, 1) == features(0, 0));
    CHECK(v0(1, 0) == features(1, 2));
    CHECK_THROWS(channel_view(features, m, 2));

    // reassembling the views and inverting the column permutation
    // reproduces the original matrix
    ChannelBatch views = split_channels(features, m);
    std::vector<std::size_t> order;
    for (const auto& ch : m.channels) {
        order.insert(order.end(), ch.columns.begin(), ch.columns.end());
    }
    std::size_t width = 0;
    for (const Matrix& v : views) width += v.cols;
    CHECK(width == features.cols);
    Matrix rebuilt(features.rows, features.cols);
    std::size_t out_col = 0;
    for (const Matrix& v : views) {
        for (std::size_t c = 0; c < v.cols; ++c, ++out_col) {
            for (std::size_t r = 0; r < v.rows; ++r) {
                rebuilt(r, order[out_col]) = v(r, c);
            }
        }
    }
    CHECK(rebuilt.data == features.data);
}

TEST_CASE("standardizer matches hand-computed z-scores") {
    Matrix x(3, 2);
    x(0, 0) = 1.0; x(1, 0) = 2.0; x(2, 0) = 3.0;  // population std sqrt(2/3)
    x(0, 1) = 7.0; x(1, 1) = 7.0; x(2, 1) = 7.0;  // constant
    Standardizer s = fit_standardizer(x);
    Matrix z = apply_standardizer(s, x);
    CHECK(z(0, 0) == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(z(1, 0) == doctest::Approx(0.0));
    CHECK(z(2, 0) == doctest::Approx(1.224744871391589).epsilon(1e-12));
    CHECK(z(0, 1) == 0.0);
    CHECK(z(1, 1) == 0.0);
    CHECK(z(2, 1) == 0.0);
}

TEST_CASE("standardization is idempotent in distribution") {
    SynthSpec spec;
    spec.channels = 2;
    spec.dims_per_channel = 4;
    spec.samples_per_class = 25;
    spec.seed = 9;
    auto [d, manifest] = synth_generate(spec);
    Standardizer s = fit_standardizer(d.features);
    Matrix z = apply_standardizer(s, d.features);
    Standardizer s2 = fit_standardizer(z);
    for (std::size_t c = 0; c < z.cols; ++c) {
        CHECK(std::abs(s2.mean[c]) < 1e-10);
        CHECK(std::abs(s2.stddev[c] - 1.0) < 1e-10);
    }
}

TEST_CASE("standardizer sidecar round-trips") {
    Standardizer s;
    s.mean = {0.5, -1.25, 3e17};
    s.stddev = {1e-8, 2.0, 0.125};
    fs::path p = fs::temp_directory_path() / "mtcae_scaler.txt";
    save_standardizer(s, p);
    Standardizer loaded = load_standardizer(p);
    CHECK(loaded.mean == s.mean);
    CHECK(loaded.stddev == s.stddev);
    fs::remove(p);
}

TEST_CASE("make_loso_folds builds one deterministic fold per speaker") {
    SynthSpec spec;
    spec.channels = 2;
    spec.dims_per_channel = 2;
    spec.samples_per_class = 25;
    spec.speakers = 10;
    spec.seed = 4;
    auto [d, manifest] = synth_generate(spec);
    FoldPlan plan = make_loso_folds(d);
    REQUIRE(plan.folds.size() == 10);

    std::set<std::string> speakers(d.speaker_ids.begin(), d.speaker_ids.end());
    std::vector<std::string> sorted(speakers.begin(), speakers.end());
    std::set<std::string> test_speakers;
    for (std::size_t i = 0; i < plan.folds.size(); ++i) {
        const auto& f = plan.folds[i];
        test_speakers.insert(f.test_speaker);
        CHECK(f.test_speaker == sorted[i]);
        CHECK(f.validation_speaker == sorted[(i + 1) % sorted.size()]);
        CHECK(f.validation_speaker != f.test_speaker);
        CHECK(f.train_speakers.size() == speakers.size() - 2);
        std::set<std::string> all(f.train_speakers.begin(), f.train_speakers.end());
        CHECK(all.count(f.test_speaker) == 0);
        CHECK(all.count(f.validation_speaker) == 0);
        all.insert(f.test_speaker);
        all.insert(f.validation_speaker);
        CHECK(all == speakers);  // jointly exhaustive
    }
    CHECK(test_speakers == speakers);  // every speaker tested exactly once
}

TEST_CASE("make_loso_folds rejects fewer than three speakers") {
    Dataset d;
    d.features = Matrix(2, 1);
    d.labels = {0, 1};
    d.speaker_ids = {"a", "b"};
    d.utterance_ids = {"u0", "u1"};
    CHECK_THROWS_AS(make_loso_folds(d), ConfigError);
}

TEST_CASE("synth_generate counts, manifest shape and determinism") {
    SynthSpec spec;  // defaults: 3 channels x 5 dims, 50/class, 10 speakers
    auto [d, m] = synth_generate(spec);
    CHECK(d.size() == 200);
    CHECK(d.dim() == 15);
    std::set<std::string> speakers(d.speaker_ids.begin(), d.speaker_ids.end());
    CHECK(speakers.size() == 10);
    CHECK(m.channel_count() == 3);
    CHECK_NOTHROW(m.validate());
    CHECK(m.channels[1].columns == std::vector<std::size_t>{5, 6, 7, 8, 9});
    std::array<int, 4> counts{};
    for (int l : d.labels) ++counts[l];
    for (int c : counts) CHECK(c == 50);

    auto [d2, m2] = synth_generate(spec);
    CHECK(d2.features.data == d.features.data);
    CHECK(d2.labels == d.labels);
    CHECK(d2.speaker_ids == d.speaker_ids);
}

TEST_CASE("synth separation controls a nearest-class-mean oracle") {
    SynthSpec wide;
    wide.channels = 3;
    wide.dims_per_channel = 5;
    wide.samples_per_class = 100;
    wide.separation = 10.0;
    wide.noise = 1.0;
    wide.seed = 11;

    auto oracle_accuracy = [](const Dataset& d) {
        // class means estimated from the data itself
        std::array<std::vector<double>, 4> means;
        std::array<std::size_t, 4> counts{};
        for (auto& m : means) m.assign(d.dim(), 0.0);
        for (std::size_t r = 0; r < d.size(); ++r) {
            ++counts[d.labels[r]];
            for (std::size_t c = 0; c < d.dim(); ++c) {
                means[d.labels[r]][c] += d.features(r, c);
            }
        }
        for (int k = 0; k < 4; ++k) {
            for (double& v : means[k]) v /= static_cast<double>(counts[k]);
        }
        std::size_t correct = 0;
        for (std::size_t r = 0; r < d.size(); ++r) {
            int best = 0;
            double best_d = 1e300;
            for (int k = 0; k < 4; ++k) {
                double dist = 0.0;
                for (std::size_t c = 0; c < d.dim(); ++c) {
                    double diff = d.features(r, c) - means[k][c];
                    dist += diff * diff;
                }
                if (dist < best_d) {
                    best_d = dist;
                    best = k;
                }
            }
            if (best == d.labels[r]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(d.size());
    };

    auto [sep_data, m1] = synth_generate(wide);
    CHECK(oracle_accuracy(sep_data) >= 0.99);

    SynthSpec flat = wide;
    flat.separation = 0.0;
    auto [flat_data, m2] = synth_generate(flat);
    double acc = oracle_accuracy(flat_data);
    CHECK(acc > 0.15);
    CHECK(acc < 0.45);  // estimated means overfit slightly above chance
}
