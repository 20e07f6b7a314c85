#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtcae/config.hpp"
#include "mtcae/errors.hpp"
#include "mtcae/experiment.hpp"
#include "mtcae/metrics.hpp"

using namespace mtcae;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(MTCAE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string tiny_loso_config(const fs::path& out_dir, bool parallel_channels) {
    std::string cfg =
        "[synth]\n"
        "channels = 2\n"
        "dims_per_channel = 3\n"
        "samples_per_class = 8\n"
        "speakers = 4\n"
        "separation = 5\n"
        "noise = 1\n"
        "[sdae]\n"
        "hidden = 6\n"
        "epochs = 2\n"
        "batch = 8\n"
        "[finetune]\n"
        "bottleneck = 3\n"
        "local_hidden = 4\n"
        "global_hidden = 6\n"
        "epochs = 3\n"
        "batch = 8\n"
        "[run]\n"
        "seed = 7\n";
    cfg += "out = " + out_dir.string() + "\n";
    cfg += std::string("parallel_channels = ") +
           (parallel_channels ? "true" : "false") + "\n";
    return cfg;
}

nlohmann::json report_without_wall_clock(const RunReport& report) {
    nlohmann::json j = report_to_json(report);
    j.erase("wall_clock_s");
    return j;
}

}  // namespace

TEST_CASE("compute_metrics on perfect predictions") {
    std::vector<int> labels = {0, 1, 2, 3, 0, 2};
    Metrics m = compute_metrics(labels, labels);
    CHECK(m.unweighted_accuracy == 1.0);
    CHECK(m.weighted_accuracy == 1.0);
    for (std::size_t i = 0; i < kClassCount; ++i) {
        for (std::size_t j = 0; j < kClassCount; ++j) {
            if (i != j) CHECK(m.confusion[i][j] == 0);
        }
    }
    CHECK(m.confusion[0][0] == 2);
    CHECK(m.confusion[2][2] == 2);
}

TEST_CASE("compute_metrics averages per-class recalls into UA") {
    // recalls (1.0, 0.5, 0.5, 1.0) -> UA 0.75
    std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
    std::vector<int> preds = {0, 0, 1, 0, 2, 3, 3, 3};
    Metrics m = compute_metrics(preds, labels);
    CHECK(m.per_class_recall[0] == 1.0);
    CHECK(m.per_class_recall[1] == 0.5);
    CHECK(m.per_class_recall[2] == 0.5);
    CHECK(m.per_class_recall[3] == 1.0);
    CHECK(m.unweighted_accuracy == doctest::Approx(0.75));
    CHECK(m.weighted_accuracy == doctest::Approx(0.75));
}

TEST_CASE("UA and WA diverge under class imbalance") {
    // balanced two classes, everything predicted class 0
    std::vector<int> labels_bal = {0, 0, 1, 1};
    std::vector<int> preds_bal = {0, 0, 0, 0};
    Metrics bal = compute_metrics(preds_bal, labels_bal);
    CHECK(bal.unweighted_accuracy == doctest::Approx(0.5));
    CHECK(bal.weighted_accuracy == doctest::Approx(0.5));

    // 90/10 imbalance: WA rewards the majority vote, UA does not
    std::vector<int> labels_imb(100, 0);
    std::fill(labels_imb.begin() + 90, labels_imb.end(), 1);
    std::vector<int> preds_imb(100, 0);
    Metrics imb = compute_metrics(preds_imb, labels_imb);
    CHECK(imb.unweighted_accuracy == doctest::Approx(0.5));
    CHECK(imb.weighted_accuracy == doctest::Approx(0.9));
    // absent classes have NaN recall and do not enter UA
    CHECK(std::isnan(imb.per_class_recall[2]));
    CHECK(std::isnan(imb.per_class_recall[3]));
}

TEST_CASE("compute_metrics input validation") {
    CHECK_THROWS_AS(compute_metrics({}, {}), MetricError);
    CHECK_THROWS_AS(compute_metrics({0, 1}, {0}), MetricError);
    CHECK_THROWS_AS(compute_metrics({0, 4}, {0, 1}), MetricError);
    CHECK_THROWS_AS(compute_metrics({0, -1}, {0, 1}), MetricError);
}

TEST_CASE("UA is invariant under scaling a single confusion row") {
    std::array<std::array<std::uint64_t, 4>, 4> c = {{{8, 1, 1, 0},
                                                      {2, 5, 2, 1},
                                                      {0, 3, 6, 1},
                                                      {1, 1, 1, 7}}};
    Metrics base = metrics_from_confusion(c);
    auto scaled = c;
    for (auto& v : scaled[2]) v *= 5;
    Metrics after = metrics_from_confusion(scaled);
    CHECK(after.unweighted_accuracy == doctest::Approx(base.unweighted_accuracy));
    CHECK(after.per_class_recall == base.per_class_recall);

    // WA is exactly trace / total
    std::uint64_t trace = 0, total = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        trace += c[i][i];
        for (std::size_t j = 0; j < 4; ++j) total += c[i][j];
    }
    CHECK(base.weighted_accuracy ==
          doctest::Approx(static_cast<double>(trace) / static_cast<double>(total)));
}

TEST_CASE("empty config keeps the reference defaults") {
    ExperimentConfig cfg = parse_config("");
    CHECK(cfg.sdae.hidden == 400);
    CHECK(cfg.sdae.epochs == 200);
    CHECK(cfg.sdae.lr == doctest::Approx(3e-4));
    CHECK(cfg.sdae.batch_size == 64);
    CHECK(cfg.sdae.corruption.rate == doctest::Approx(0.2));
    CHECK(cfg.sdae.beta == doctest::Approx(1e-4));
    CHECK(cfg.finetune.bottleneck == 30);
    CHECK(cfg.finetune.local_hidden == 100);
    CHECK(cfg.finetune.global_hidden == 1000);
    CHECK(cfg.finetune.epochs == 1000);
    CHECK(cfg.finetune.lr == doctest::Approx(3e-4));
    CHECK(cfg.finetune.batch_size == 64);
    CHECK(cfg.finetune.lambda == doctest::Approx(0.1));
    CHECK(cfg.finetune.gamma == doctest::Approx(0.95));
    CHECK(cfg.finetune.fusion_local_mean == false);
    CHECK(cfg.seed == 0);
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.parallel_channels == true);
    CHECK(cfg.parallel_folds == false);
    CHECK(!cfg.synth.has_value());
}

TEST_CASE("config parsing applies overrides and rejects bad input") {
    ExperimentConfig cfg = parse_config(
        "# comment\n"
        "[data]\n"
        "features = feats.csv\n"
        "manifest = chans.txt\n"
        "[finetune]\n"
        "lambda = 0.5\n"
        "gamma = 0.8\n"
        "[fusion]\n"
        "local_mean = true\n"
        "[run]\n"
        "seed = 42\n"
        "parallel_folds = on\n");
    CHECK(cfg.features_path == "feats.csv");
    CHECK(cfg.manifest_path == "chans.txt");
    CHECK(cfg.finetune.lambda == doctest::Approx(0.5));
    CHECK(cfg.finetune.gamma == doctest::Approx(0.8));
    CHECK(cfg.finetune.fusion_local_mean == true);
    CHECK(cfg.seed == 42);
    CHECK(cfg.parallel_folds == true);

    CHECK_THROWS_AS(parse_config("[bogus]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[finetune]\nwidth = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[finetune]\nlambda = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sdae]\nepochs = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[finetune]\nlr = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
}

TEST_CASE("run_gradcheck passes and zeroes the disabled paths") {
    GradcheckReport report = run_gradcheck();
    CHECK(report.pass);
    CHECK(report.max_rel_error < report.tolerance);
    CHECK(!report.entries.empty());

    bool saw_lambda0_global = false;
    for (const auto& e : report.entries) {
        CHECK(e.max_rel_error <= report.max_rel_error);
        if (e.lambda == 0.0 && e.block.rfind("global", 0) == 0) {
            saw_lambda0_global = true;
            CHECK(e.max_rel_error == 0.0);  // both analytic and FD are zero
        }
    }
    CHECK(saw_lambda0_global);

    nlohmann::json j = gradcheck_to_json(report);
    CHECK(j["pass"] == true);
    CHECK(nlohmann::json::parse(j.dump()) == j);
}

TEST_CASE("run_loso end-to-end: folds, metrics, artifacts, determinism") {
    fs::path out1 = fs::temp_directory_path() / "mtcae_loso1";
    fs::path out2 = fs::temp_directory_path() / "mtcae_loso2";
    fs::remove_all(out1);
    fs::remove_all(out2);

    ExperimentConfig cfg1 = parse_config(tiny_loso_config(out1, true));
    RunReport r1 = run_loso(cfg1);
    REQUIRE(r1.folds.size() == 4);  // one per pseudo-speaker
    for (const FoldResult& f : r1.folds) {
        CHECK(f.completed);
        CHECK(f.metrics.unweighted_accuracy >= 0.0);
        CHECK(f.metrics.unweighted_accuracy <= 1.0);
    }
    CHECK(r1.has_pooled);
    CHECK(r1.wall_clock_s > 0.0);

    // pooled WA equals trace/total of the summed confusions
    std::uint64_t trace = 0, total = 0;
    for (const FoldResult& f : r1.folds) {
        for (std::size_t i = 0; i < 4; ++i) {
            trace += f.metrics.confusion[i][i];
            for (std::size_t j = 0; j < 4; ++j) total += f.metrics.confusion[i][j];
        }
    }
    CHECK(r1.pooled.weighted_accuracy ==
          doctest::Approx(static_cast<double>(trace) / static_cast<double>(total)));

    CHECK(fs::exists(out1 / "report.json"));
    for (std::size_t i = 0; i < r1.folds.size(); ++i) {
        fs::path ckpt = out1 / ("fold_" + std::to_string(i) + "_" +
                                r1.folds[i].test_speaker + ".ckpt");
        CHECK(fs::exists(ckpt));
    }

    // the written file parses back to the in-memory report
    std::ifstream in(out1 / "report.json");
    nlohmann::json on_disk = nlohmann::json::parse(in);
    CHECK(on_disk == report_to_json(r1));
    CHECK(nlohmann::json::parse(report_to_json(r1).dump()) == report_to_json(r1));

    // serial channel pretraining must reproduce the parallel run exactly
    ExperimentConfig cfg2 = parse_config(tiny_loso_config(out2, false));
    RunReport r2 = run_loso(cfg2);
    nlohmann::json j1 = report_without_wall_clock(r1);
    nlohmann::json j2 = report_without_wall_clock(r2);
    j1["config"]["run"].erase("out");
    j2["config"]["run"].erase("out");
    j1["config"]["run"].erase("parallel_channels");
    j2["config"]["run"].erase("parallel_channels");
    CHECK(j1.dump() == j2.dump());

    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("cli: gradcheck, synth, loso and error handling") {
    CHECK(run_cli("gradcheck") == 0);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("eval") != 0);  // missing required --checkpoint/--data

    fs::path out = fs::temp_directory_path() / "mtcae_cli_out";
    fs::remove_all(out);
    CHECK(run_cli("synth --out " + out.string()) == 0);
    CHECK(fs::exists(out / "features.csv"));
    CHECK(fs::exists(out / "channels.manifest"));
    fs::remove_all(out);

    fs::path loso_out = fs::temp_directory_path() / "mtcae_cli_loso";
    fs::remove_all(loso_out);
    fs::path cfg_path = fs::temp_directory_path() / "mtcae_cli_loso.cfg";
    {
        std::ofstream f(cfg_path);
        f << tiny_loso_config(loso_out, true);
    }
    CHECK(run_cli("loso --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(loso_out / "report.json"));
    fs::remove_all(loso_out);
    fs::remove(cfg_path);
}
