#include "mtcae/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "mtcae/errors.hpp"
#include "mtcae/gradcheck.hpp"
#include "mtcae/rng.hpp"

namespace mtcae {

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
    return Rng::mix(master, index);
}

namespace {

std::vector<std::size_t> rows_of_speakers(const Dataset& ds,
                                          const std::vector<std::string>& speakers) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (const std::string& s : speakers) {
            if (ds.speaker_ids[i] == s) {
                rows.push_back(i);
                break;
            }
        }
    }
    return rows;
}

std::vector<int> labels_at(const Dataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = ds.labels[rows[i]];
    return labels;
}

struct LoadedData {
    Dataset dataset;
    ChannelManifest manifest;
};

LoadedData load_experiment_data(const ExperimentConfig& config) {
    LoadedData data;
    if (config.synth) {
        auto [ds, manifest] = synth_generate(*config.synth);
        data.dataset = std::move(ds);
        data.manifest = std::move(manifest);
        if (!config.manifest_path.empty()) {
            data.manifest = load_manifest(config.manifest_path);
        }
    } else {
        if (config.features_path.empty()) {
            throw ConfigError("no feature CSV configured and no [synth] section");
        }
        if (config.manifest_path.empty()) {
            throw ConfigError("a channel manifest is required with real data");
        }
        data.dataset = load_features_csv(config.features_path);
        data.manifest = load_manifest(config.manifest_path);
    }
    data.manifest.validate();
    if (data.manifest.total_columns() != data.dataset.dim()) {
        throw ManifestError("manifest covers " +
                            std::to_string(data.manifest.total_columns()) +
                            " columns but dataset has " +
                            std::to_string(data.dataset.dim()));
    }
    return data;
}

FoldResult run_fold(const ExperimentConfig& config, const Dataset& dataset,
                    const ChannelManifest& manifest,
                    const FoldPlan::Fold& fold, std::size_t fold_index) {
    FoldResult result;
    result.test_speaker = fold.test_speaker;
    result.validation_speaker = fold.validation_speaker;

    auto train_rows = rows_of_speakers(dataset, fold.train_speakers);
    auto val_rows = rows_of_speakers(dataset, {fold.validation_speaker});
    auto test_rows = rows_of_speakers(dataset, {fold.test_speaker});

    Matrix train_raw = select_rows(dataset.features, train_rows);
    Standardizer scaler = fit_standardizer(train_raw);

    LabeledChannelData train_set{
        split_channels(apply_standardizer(scaler, train_raw), manifest),
        labels_at(dataset, train_rows)};
    LabeledChannelData val_set{
        split_channels(
            apply_standardizer(scaler, select_rows(dataset.features, val_rows)),
            manifest),
        labels_at(dataset, val_rows)};
    LabeledChannelData test_set{
        split_channels(
            apply_standardizer(scaler, select_rows(dataset.features, test_rows)),
            manifest),
        labels_at(dataset, test_rows)};

    const std::size_t n_channels = manifest.channel_count();
    std::uint64_t fold_master = mix_seed(config.seed, fold_index);

    std::vector<PretrainedStack> stacks = pretrain_all(
        train_set.channels, config.sdae, fold_master, config.parallel_channels);

    FineTuneConfig ft = config.finetune;
    ft.seed = mix_seed(fold_master, n_channels + 1);
    Rng build_rng = Rng::substream(fold_master, n_channels);
    MtcAeModel model =
        build_model(manifest.channel_dims(), stacks, ft, build_rng);

    TrainResult trained = train(model, train_set, val_set, ft);
    std::vector<int> predictions = predict(trained.model, test_set.channels,
                                           ft.gamma, ft.fusion_local_mean);

    result.metrics = compute_metrics(predictions, test_set.labels);
    result.best_epoch = trained.history.best_epoch;
    result.history = std::move(trained.history);
    result.completed = true;

    std::filesystem::path ckpt =
        std::filesystem::path(config.out_dir) /
        ("fold_" + std::to_string(fold_index) + "_" + fold.test_speaker + ".ckpt");
    save_checkpoint(trained.model, ckpt);
    return result;
}

}  // namespace

RunReport run_loso(const ExperimentConfig& config) {
    auto t0 = std::chrono::steady_clock::now();

    RunReport report;
    report.config = config;
    report.seed = config.seed;

    LoadedData data = load_experiment_data(config);
    FoldPlan plan = make_loso_folds(data.dataset);
    std::filesystem::create_directories(config.out_dir);

    report.folds.resize(plan.folds.size());
    auto execute = [&](std::size_t i) {
        try {
            report.folds[i] =
                run_fold(config, data.dataset, data.manifest, plan.folds[i], i);
        } catch (const std::exception& e) {
            report.folds[i].test_speaker = plan.folds[i].test_speaker;
            report.folds[i].validation_speaker = plan.folds[i].validation_speaker;
            report.folds[i].completed = false;
            report.folds[i].error = e.what();
        }
    };

    if (config.parallel_folds && plan.folds.size() > 1) {
        std::size_t workers =
            std::min<std::size_t>(plan.folds.size(),
                                  std::max(1u, std::thread::hardware_concurrency()));
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < plan.folds.size();
                     i = next.fetch_add(1)) {
                    execute(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    } else {
        for (std::size_t i = 0; i < plan.folds.size(); ++i) execute(i);
    }

    double ua_sum = 0.0;
    std::size_t completed = 0;
    std::array<std::array<std::uint64_t, kClassCount>, kClassCount> pooled{};
    for (const FoldResult& fold : report.folds) {
        if (!fold.completed) continue;
        ++completed;
        ua_sum += fold.metrics.unweighted_accuracy;
        for (std::size_t t = 0; t < kClassCount; ++t) {
            for (std::size_t p = 0; p < kClassCount; ++p) {
                pooled[t][p] += fold.metrics.confusion[t][p];
            }
        }
    }
    if (completed > 0) {
        report.aggregate_ua = ua_sum / static_cast<double>(completed);
        report.pooled = metrics_from_confusion(pooled);
        report.has_pooled = true;
    }

    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream out(std::filesystem::path(config.out_dir) / "report.json",
                      std::ios::trunc);
    out << report_to_json(report).dump(2) << "\n";
    return report;
}

GradcheckReport run_gradcheck() {
    GradcheckReport report;
    report.tolerance = 1e-5;

    const std::size_t n_channels = 3;
    const std::size_t dim = 8;
    FineTuneConfig ft;
    ft.bottleneck = 4;
    ft.local_hidden = 6;
    ft.global_hidden = 10;

    Rng rng(42);
    std::vector<std::size_t> dims(n_channels, dim);
    std::vector<PretrainedStack> stacks(n_channels);
    for (std::size_t i = 0; i < n_channels; ++i) {
        DenoisingAutoencoder stage1{make_dense(dim, dim, Activation::Elu, rng),
                                    make_dense(dim, dim, Activation::Elu, rng)};
        DenoisingAutoencoder stage2{make_dense(dim, dim, Activation::Elu, rng),
                                    make_dense(dim, dim, Activation::Elu, rng)};
        stacks[i] = PretrainedStack{{stage1, stage2}, i};
    }
    MtcAeModel model = build_model(dims, stacks, ft, rng);

    const std::size_t batch = 5;
    ChannelBatch inputs(n_channels);
    for (auto& m : inputs) {
        m = Matrix(batch, dim);
        for (double& v : m.data) v = rng.gaussian();
    }
    std::vector<int> labels = {0, 1, 2, 3, 0};

    // Flattened parameter vector with per-block offsets.
    struct Block {
        std::string name;
        std::size_t offset;
        std::size_t length;
    };
    std::vector<Block> blocks;
    std::vector<double> params;
    for_each_layer(model, [&](const DenseLayer& layer, const std::string& name) {
        blocks.push_back({name + ".W", params.size(), layer.weights.size()});
        params.insert(params.end(), layer.weights.data.begin(),
                      layer.weights.data.end());
        blocks.push_back({name + ".b", params.size(), layer.biases.size()});
        params.insert(params.end(), layer.biases.begin(), layer.biases.end());
    });

    auto unflatten = [&](MtcAeModel& m, const std::vector<double>& p) {
        std::size_t pos = 0;
        for_each_layer(m, [&](DenseLayer& layer, const std::string&) {
            std::copy(p.begin() + pos, p.begin() + pos + layer.weights.size(),
                      layer.weights.data.begin());
            pos += layer.weights.size();
            std::copy(p.begin() + pos, p.begin() + pos + layer.biases.size(),
                      layer.biases.begin());
            pos += layer.biases.size();
        });
    };

    for (double lambda : {0.0, 0.1, 0.5, 1.0}) {
        ForwardCache cache = forward(model, inputs);
        ModelGrads grads = backward(model, cache, labels, lambda);

        std::vector<double> analytic;
        analytic.reserve(params.size());
        auto push = [&](const std::vector<double>& v) {
            analytic.insert(analytic.end(), v.begin(), v.end());
        };
        for (const auto& lg : grads.locals) {
            for (const auto& g : lg) {
                push(g.weight_grad.data);
                push(g.bias_grad);
            }
        }
        push(grads.global_hidden.weight_grad.data);
        push(grads.global_hidden.bias_grad);
        push(grads.global_output.weight_grad.data);
        push(grads.global_output.bias_grad);

        for (const Block& block : blocks) {
            std::vector<double> block_params(
                params.begin() + block.offset,
                params.begin() + block.offset + block.length);
            std::vector<double> block_grad(
                analytic.begin() + block.offset,
                analytic.begin() + block.offset + block.length);
            auto loss = [&](const std::vector<double>& bp) {
                std::vector<double> full = params;
                std::copy(bp.begin(), bp.end(), full.begin() + block.offset);
                MtcAeModel probe = model;
                unflatten(probe, full);
                return joint_loss(forward(probe, inputs), labels, lambda);
            };
            double err =
                finite_difference_gradcheck(loss, block_params, block_grad, 1e-5);
            report.entries.push_back({lambda, block.name, err});
            report.max_rel_error = std::max(report.max_rel_error, err);
        }
    }
    report.pass = report.max_rel_error < report.tolerance;
    return report;
}

nlohmann::json metrics_to_json(const Metrics& metrics) {
    nlohmann::json recalls = nlohmann::json::array();
    for (double r : metrics.per_class_recall) {
        if (std::isnan(r)) {
            recalls.push_back(nullptr);
        } else {
            recalls.push_back(r);
        }
    }
    return {{"confusion", metrics.confusion},
            {"per_class_recall", recalls},
            {"ua", metrics.unweighted_accuracy},
            {"wa", metrics.weighted_accuracy}};
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j = {
        {"data",
         {{"features", config.features_path}, {"manifest", config.manifest_path}}},
        {"sdae",
         {{"hidden", config.sdae.hidden},
          {"epochs", config.sdae.epochs},
          {"lr", config.sdae.lr},
          {"batch", config.sdae.batch_size},
          {"corruption", config.sdae.corruption.rate},
          {"beta", config.sdae.beta}}},
        {"finetune",
         {{"bottleneck", config.finetune.bottleneck},
          {"local_hidden", config.finetune.local_hidden},
          {"global_hidden", config.finetune.global_hidden},
          {"epochs", config.finetune.epochs},
          {"lr", config.finetune.lr},
          {"batch", config.finetune.batch_size},
          {"lambda", config.finetune.lambda},
          {"gamma", config.finetune.gamma}}},
        {"fusion", {{"local_mean", config.finetune.fusion_local_mean}}},
        {"run",
         {{"seed", config.seed},
          {"out", config.out_dir},
          {"parallel_channels", config.parallel_channels},
          {"parallel_folds", config.parallel_folds}}}};
    if (config.synth) {
        j["synth"] = {{"channels", config.synth->channels},
                      {"dims_per_channel", config.synth->dims_per_channel},
                      {"samples_per_class", config.synth->samples_per_class},
                      {"speakers", config.synth->speakers},
                      {"separation", config.synth->separation},
                      {"noise", config.synth->noise},
                      {"seed", config.synth->seed}};
    }
    return j;
}

nlohmann::json report_to_json(const RunReport& report) {
    nlohmann::json folds = nlohmann::json::array();
    for (const FoldResult& fold : report.folds) {
        nlohmann::json f = {{"test_speaker", fold.test_speaker},
                            {"validation_speaker", fold.validation_speaker},
                            {"completed", fold.completed}};
        if (fold.completed) {
            f["metrics"] = metrics_to_json(fold.metrics);
            f["best_epoch"] = fold.best_epoch;
            f["history"] = {{"epoch_loss", fold.history.epoch_loss},
                            {"val_ua", fold.history.val_ua}};
        } else {
            f["error"] = fold.error;
        }
        folds.push_back(std::move(f));
    }
    return {{"config", config_to_json(report.config)},
            {"seed", report.seed},
            {"folds", folds},
            {"pooled_metrics",
             report.has_pooled ? metrics_to_json(report.pooled)
                               : nlohmann::json(nullptr)},
            {"aggregate_ua", report.aggregate_ua},
            {"wall_clock_s", report.wall_clock_s}};
}

nlohmann::json gradcheck_to_json(const GradcheckReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"lambda", e.lambda},
                           {"block", e.block},
                           {"max_rel_error", e.max_rel_error}});
    }
    return {{"entries", entries},
            {"max_rel_error", report.max_rel_error},
            {"tolerance", report.tolerance},
            {"pass", report.pass}};
}

}  // namespace mtcae
