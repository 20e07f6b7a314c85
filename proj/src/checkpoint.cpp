#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mtcae/errors.hpp"
#include "mtcae/model.hpp"

namespace mtcae {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'C', 'A'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const char* field) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) {
        throw LoadError(std::string("checkpoint truncated while reading ") + field);
    }
    return v;
}

}  // namespace

void save_checkpoint(const MtcAeModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw LoadError("cannot open checkpoint for writing: " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(model.channel_count()));
    write_u32(out, static_cast<std::uint32_t>(model.bottleneck_width));
    write_u32(out, static_cast<std::uint32_t>(model.locals[0].layer1.out_dim()));
    write_u32(out, static_cast<std::uint32_t>(model.locals[0].hidden.out_dim()));
    write_u32(out, static_cast<std::uint32_t>(model.global.hidden.out_dim()));
    write_u32(out, static_cast<std::uint32_t>(model.class_count));
    for (std::size_t d : model.channel_dims) {
        write_u32(out, static_cast<std::uint32_t>(d));
    }
    for_each_layer(model, [&](const DenseLayer& layer, const std::string&) {
        out.write(reinterpret_cast<const char*>(layer.weights.data.data()),
                  static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.biases.data()),
                  static_cast<std::streamsize>(layer.biases.size() * sizeof(double)));
    });
    out.flush();
    if (!out) {
        throw LoadError("failed to write checkpoint: " + path.string());
    }
}

MtcAeModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open checkpoint: " + path.string());
    }
    char magic[4] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw LoadError("bad checkpoint magic: " + path.string());
    }
    std::uint32_t version = read_u32(in, "version");
    if (version != kVersion) {
        throw LoadError("unsupported checkpoint version " + std::to_string(version));
    }

    std::uint32_t n_channels = read_u32(in, "channel count");
    std::uint32_t bottleneck = read_u32(in, "bottleneck width");
    std::uint32_t sdae_hidden = read_u32(in, "sdae hidden width");
    std::uint32_t local_hidden = read_u32(in, "local hidden width");
    std::uint32_t global_hidden = read_u32(in, "global hidden width");
    std::uint32_t class_count = read_u32(in, "class count");
    if (n_channels == 0 || bottleneck == 0 || sdae_hidden == 0 ||
        local_hidden == 0 || global_hidden == 0 || class_count == 0) {
        throw LoadError("checkpoint header has a zero dimension");
    }

    MtcAeModel model;
    model.bottleneck_width = bottleneck;
    model.class_count = class_count;
    model.channel_dims.resize(n_channels);
    for (std::uint32_t i = 0; i < n_channels; ++i) {
        std::uint32_t d = read_u32(in, "channel dim");
        if (d == 0) throw LoadError("checkpoint declares an empty channel");
        model.channel_dims[i] = d;
    }

    model.locals.reserve(n_channels);
    for (std::uint32_t i = 0; i < n_channels; ++i) {
        LocalClassifier local;
        local.layer1 = DenseLayer(sdae_hidden, model.channel_dims[i], Activation::Elu);
        local.layer2 = DenseLayer(sdae_hidden, sdae_hidden, Activation::Elu);
        local.bottleneck = DenseLayer(bottleneck, sdae_hidden, Activation::Elu);
        local.hidden = DenseLayer(local_hidden, bottleneck, Activation::Elu);
        local.output = DenseLayer(class_count, local_hidden, Activation::Softmax);
        model.locals.push_back(std::move(local));
    }
    model.global.hidden =
        DenseLayer(global_hidden, n_channels * bottleneck, Activation::Elu);
    model.global.output = DenseLayer(class_count, global_hidden, Activation::Softmax);

    for_each_layer(model, [&](DenseLayer& layer, const std::string& name) {
        in.read(reinterpret_cast<char*>(layer.weights.data.data()),
                static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(layer.biases.data()),
                static_cast<std::streamsize>(layer.biases.size() * sizeof(double)));
        if (!in) {
            throw LoadError("checkpoint truncated in block " + name);
        }
    });
    in.peek();
    if (!in.eof()) {
        throw LoadError("trailing bytes after checkpoint parameters");
    }
    return model;
}

}  // namespace mtcae
