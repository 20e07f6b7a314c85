#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtcae/config.hpp"
#include "mtcae/dataio.hpp"
#include "mtcae/errors.hpp"
#include "mtcae/experiment.hpp"
#include "mtcae/metrics.hpp"
#include "mtcae/model.hpp"
#include "mtcae/sdae.hpp"

namespace fs = std::filesystem;
using namespace mtcae;

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file");
    cmd->add_option("--seed", args.seed, "seed override")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--out", args.out_dir, "output directory override");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    if (args.seed_given) cfg.seed = args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

struct LoadedExperiment {
    Dataset dataset;
    ChannelManifest manifest;
};

LoadedExperiment load_data(const ExperimentConfig& cfg) {
    LoadedExperiment data;
    if (cfg.synth) {
        auto [ds, manifest] = synth_generate(*cfg.synth);
        data.dataset = std::move(ds);
        data.manifest = std::move(manifest);
        if (!cfg.manifest_path.empty()) {
            data.manifest = load_manifest(cfg.manifest_path);
        }
    } else {
        if (cfg.features_path.empty()) {
            throw ConfigError("no feature CSV configured and no [synth] section");
        }
        if (cfg.manifest_path.empty()) {
            throw ConfigError("a channel manifest is required with real data");
        }
        data.dataset = load_features_csv(cfg.features_path);
        data.manifest = load_manifest(cfg.manifest_path);
    }
    data.manifest.validate();
    if (data.manifest.total_columns() != data.dataset.dim()) {
        throw ManifestError("manifest does not match the dataset dimensionality");
    }
    return data;
}

int cmd_synth(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    SynthSpec spec = cfg.synth.value_or(SynthSpec{});
    if (args.seed_given) spec.seed = args.seed;
    auto [dataset, manifest] = synth_generate(spec);
    fs::create_directories(cfg.out_dir);
    fs::path features = fs::path(cfg.out_dir) / "features.csv";
    fs::path manifest_path = fs::path(cfg.out_dir) / "channels.manifest";
    save_features_csv(dataset, features);
    save_manifest(manifest, manifest_path);
    std::cout << "wrote " << dataset.size() << " utterances x " << dataset.dim()
              << " features to " << features.string() << "\n";
    std::cout << "wrote manifest (" << manifest.channel_count() << " channels) to "
              << manifest_path.string() << "\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    LoadedExperiment data = load_data(cfg);

    Standardizer scaler = fit_standardizer(data.dataset.features);
    Matrix standardized = apply_standardizer(scaler, data.dataset.features);
    ChannelBatch channels = split_channels(standardized, data.manifest);

    std::vector<PretrainedStack> stacks =
        pretrain_all(channels, cfg.sdae, cfg.seed, cfg.parallel_channels);

    FineTuneConfig ft = cfg.finetune;
    Rng build_rng = Rng::substream(cfg.seed, data.manifest.channel_count());
    MtcAeModel model =
        build_model(data.manifest.channel_dims(), stacks, ft, build_rng);

    fs::create_directories(cfg.out_dir);
    fs::path ckpt = fs::path(cfg.out_dir) / "pretrained.ckpt";
    save_checkpoint(model, ckpt);
    save_standardizer(scaler, fs::path(cfg.out_dir) / "pretrained.scaler");
    std::cout << "pretrained " << stacks.size() << " channel stacks; checkpoint at "
              << ckpt.string() << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& val_speaker_arg) {
    ExperimentConfig cfg = resolve_config(args);
    LoadedExperiment data = load_data(cfg);

    std::set<std::string> distinct(data.dataset.speaker_ids.begin(),
                                   data.dataset.speaker_ids.end());
    if (distinct.size() < 2) {
        throw ConfigError("train needs at least 2 distinct speakers");
    }
    std::string val_speaker =
        val_speaker_arg.empty() ? *distinct.begin() : val_speaker_arg;
    if (!distinct.count(val_speaker)) {
        throw ConfigError("validation speaker '" + val_speaker +
                          "' not present in the dataset");
    }

    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
    for (std::size_t i = 0; i < data.dataset.size(); ++i) {
        (data.dataset.speaker_ids[i] == val_speaker ? val_rows : train_rows)
            .push_back(i);
    }

    Matrix train_raw = select_rows(data.dataset.features, train_rows);
    Standardizer scaler = fit_standardizer(train_raw);

    auto labels_at = [&](const std::vector<std::size_t>& rows) {
        std::vector<int> labels(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            labels[i] = data.dataset.labels[rows[i]];
        }
        return labels;
    };
    LabeledChannelData train_set{
        split_channels(apply_standardizer(scaler, train_raw), data.manifest),
        labels_at(train_rows)};
    LabeledChannelData val_set{
        split_channels(apply_standardizer(
                           scaler, select_rows(data.dataset.features, val_rows)),
                       data.manifest),
        labels_at(val_rows)};

    std::vector<PretrainedStack> stacks = pretrain_all(
        train_set.channels, cfg.sdae, cfg.seed, cfg.parallel_channels);

    const std::size_t n = data.manifest.channel_count();
    FineTuneConfig ft = cfg.finetune;
    ft.seed = mix_seed(cfg.seed, n + 1);
    Rng build_rng = Rng::substream(cfg.seed, n);
    MtcAeModel model =
        build_model(data.manifest.channel_dims(), stacks, ft, build_rng);

    TrainResult trained = train(model, train_set, val_set, ft);

    fs::create_directories(cfg.out_dir);
    fs::path ckpt = fs::path(cfg.out_dir) / "model.ckpt";
    save_checkpoint(trained.model, ckpt);
    save_standardizer(scaler, fs::path(cfg.out_dir) / "model.scaler");
    nlohmann::json history = {{"epoch_loss", trained.history.epoch_loss},
                              {"val_ua", trained.history.val_ua},
                              {"best_epoch", trained.history.best_epoch},
                              {"best_val_ua", trained.history.best_val_ua},
                              {"validation_speaker", val_speaker}};
    std::ofstream hist_out(fs::path(cfg.out_dir) / "history.json",
                           std::ios::trunc);
    hist_out << history.dump(2) << "\n";
    std::printf("best validation UA %.4f at epoch %zu; checkpoint at %s\n",
                trained.history.best_val_ua, trained.history.best_epoch,
                ckpt.string().c_str());
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& data_path, const std::string& manifest_path,
             const std::string& scaler_path, double gamma) {
    ExperimentConfig cfg = resolve_config(args);
    MtcAeModel model = load_checkpoint(checkpoint_path);
    Dataset dataset = load_features_csv(data_path);

    ChannelManifest manifest;
    if (!manifest_path.empty()) {
        manifest = load_manifest(manifest_path);
    } else {
        // Contiguous partition matching the checkpoint's channel layout.
        std::size_t col = 0;
        for (std::size_t i = 0; i < model.channel_dims.size(); ++i) {
            ChannelManifest::Channel channel;
            channel.name = "ch" + std::to_string(i);
            for (std::size_t j = 0; j < model.channel_dims[i]; ++j) {
                channel.columns.push_back(col++);
            }
            manifest.channels.push_back(std::move(channel));
        }
    }
    manifest.validate();
    if (manifest.total_columns() != dataset.dim()) {
        throw ManifestError("checkpoint/manifest does not match data dimensionality");
    }

    Standardizer scaler = scaler_path.empty()
                              ? fit_standardizer(dataset.features)
                              : load_standardizer(scaler_path);
    if (scaler_path.empty()) {
        std::cerr << "note: no --scaler given; standardizing on the evaluation "
                     "data itself\n";
    }
    ChannelBatch channels =
        split_channels(apply_standardizer(scaler, dataset.features), manifest);

    std::vector<int> predictions =
        predict(model, channels, gamma, cfg.finetune.fusion_local_mean);
    Metrics metrics = compute_metrics(predictions, dataset.labels);
    std::cout << metrics_to_json(metrics).dump(2) << "\n";
    return 0;
}

int cmd_loso(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    RunReport report = run_loso(cfg);
    for (std::size_t i = 0; i < report.folds.size(); ++i) {
        const FoldResult& fold = report.folds[i];
        if (fold.completed) {
            std::printf("fold %zu (test %s): UA %.4f WA %.4f best_epoch %zu\n", i,
                        fold.test_speaker.c_str(),
                        fold.metrics.unweighted_accuracy,
                        fold.metrics.weighted_accuracy, fold.best_epoch);
        } else {
            std::printf("fold %zu (test %s): FAILED: %s\n", i,
                        fold.test_speaker.c_str(), fold.error.c_str());
        }
    }
    if (report.has_pooled) {
        std::printf("aggregate UA (fold mean): %.4f, pooled UA: %.4f, pooled WA: %.4f\n",
                    report.aggregate_ua, report.pooled.unweighted_accuracy,
                    report.pooled.weighted_accuracy);
    }
    std::printf("report: %s\n",
                (fs::path(cfg.out_dir) / "report.json").string().c_str());
    bool all_completed = std::all_of(report.folds.begin(), report.folds.end(),
                                     [](const FoldResult& f) { return f.completed; });
    return all_completed ? 0 : 1;
}

int cmd_gradcheck(const CommonArgs& args) {
    (void)resolve_config(args);  // validates the config if one was given
    GradcheckReport report = run_gradcheck();
    double last_lambda = -1.0;
    for (const auto& entry : report.entries) {
        if (entry.lambda != last_lambda) {
            std::printf("lambda = %.2f\n", entry.lambda);
            last_lambda = entry.lambda;
        }
        std::printf("  %-24s max rel error %.3e\n", entry.block.c_str(),
                    entry.max_rel_error);
    }
    std::printf("gradcheck %s (max rel error %.3e, tolerance %.0e)\n",
                report.pass ? "PASS" : "FAIL", report.max_rel_error,
                report.tolerance);
    return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-channel auto-encoder emotion classification experiments"};
    app.require_subcommand(1);

    CommonArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, synth_args);

    CommonArgs pretrain_args;
    CLI::App* pretrain =
        app.add_subcommand("pretrain", "pretrain per-channel autoencoder stacks");
    add_common(pretrain, pretrain_args);

    CommonArgs train_args;
    std::string val_speaker;
    CLI::App* train_cmd =
        app.add_subcommand("train", "fine-tune with a held-out validation speaker");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--val-speaker", val_speaker,
                          "validation speaker (default: first in sorted order)");

    CommonArgs eval_args;
    std::string eval_checkpoint;
    std::string eval_data;
    std::string eval_manifest;
    std::string eval_scaler;
    double eval_gamma = 0.95;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "evaluate a checkpoint on a labeled set");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")
        ->required();
    eval_cmd->add_option("--data", eval_data, "feature CSV")->required();
    eval_cmd->add_option("--manifest", eval_manifest,
                         "channel manifest (default: contiguous from checkpoint)");
    eval_cmd->add_option("--scaler", eval_scaler, "standardizer sidecar file");
    eval_cmd->add_option("--gamma", eval_gamma, "fusion weight");

    CommonArgs loso_args;
    CLI::App* loso =
        app.add_subcommand("loso", "leave-one-speaker-out cross-validation run");
    add_common(loso, loso_args);

    CommonArgs gradcheck_args;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference joint-loss gradient check");
    add_common(gradcheck, gradcheck_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (pretrain->parsed()) return cmd_pretrain(pretrain_args);
        if (train_cmd->parsed()) return cmd_train(train_args, val_speaker);
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_args, eval_checkpoint, eval_data, eval_manifest,
                            eval_scaler, eval_gamma);
        }
        if (loso->parsed()) return cmd_loso(loso_args);
        if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
