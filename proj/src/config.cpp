#include "mtcae/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mtcae/errors.hpp"

namespace mtcae {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> parse_ini(const std::string& text) {
    std::map<std::string, Section> sections;
    std::istringstream in(text);
    std::string line;
    std::string current;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError("unterminated section header at line " +
                                  std::to_string(line_no));
            }
            current = trim(t.substr(1, t.size() - 2));
            sections[current];
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value' at line " +
                              std::to_string(line_no));
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("empty key at line " + std::to_string(line_no));
        }
        sections[current][key] = value;
    }
    return sections;
}

class SectionReader {
public:
    SectionReader(const std::string& name, const Section* section)
        : name_(name), section_(section) {}

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!section_) return;
        auto it = section_->find(key);
        if (it == section_->end()) return;
        used_.insert(key);
        parse(key, it->second, out);
    }

    void check_unknown() const {
        if (!section_) return;
        for (const auto& [key, _] : *section_) {
            if (!used_.count(key)) {
                throw ConfigError("unknown key '" + key + "' in section [" +
                                  name_ + "]");
            }
        }
    }

private:
    void parse(const std::string&, const std::string& value, std::string& out) {
        out = value;
    }
    void parse(const std::string& key, const std::string& value, bool& out) {
        if (value == "true" || value == "on" || value == "1") {
            out = true;
        } else if (value == "false" || value == "off" || value == "0") {
            out = false;
        } else {
            throw ConfigError("key '" + key + "' expects a boolean, got '" +
                              value + "'");
        }
    }
    template <typename T>
    void parse(const std::string& key, const std::string& value, T& out) {
        auto [ptr, ec] =
            std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw ConfigError("key '" + key + "' has invalid value '" + value +
                              "'");
        }
    }

    std::string name_;
    const Section* section_;
    std::set<std::string> used_;
};

void require_unit_interval(double v, const std::string& what) {
    if (v < 0.0 || v > 1.0) {
        throw ConfigError(what + " must be in [0, 1]");
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    auto sections = parse_ini(text);
    for (const auto& [name, _] : sections) {
        if (name != "data" && name != "synth" && name != "sdae" &&
            name != "finetune" && name != "fusion" && name != "run") {
            throw ConfigError("unknown section [" + name + "]");
        }
    }

    ExperimentConfig cfg;
    auto section = [&](const std::string& name) -> const Section* {
        auto it = sections.find(name);
        return it == sections.end() ? nullptr : &it->second;
    };

    SectionReader data("data", section("data"));
    data.get("features", cfg.features_path);
    data.get("manifest", cfg.manifest_path);
    data.check_unknown();

    if (const Section* s = section("synth")) {
        SynthSpec spec;
        SectionReader synth("synth", s);
        synth.get("channels", spec.channels);
        synth.get("dims_per_channel", spec.dims_per_channel);
        synth.get("samples_per_class", spec.samples_per_class);
        synth.get("speakers", spec.speakers);
        synth.get("separation", spec.separation);
        synth.get("noise", spec.noise);
        synth.get("seed", spec.seed);
        synth.check_unknown();
        cfg.synth = spec;
    }

    SectionReader sdae("sdae", section("sdae"));
    sdae.get("hidden", cfg.sdae.hidden);
    sdae.get("epochs", cfg.sdae.epochs);
    sdae.get("lr", cfg.sdae.lr);
    sdae.get("batch", cfg.sdae.batch_size);
    sdae.get("corruption", cfg.sdae.corruption.rate);
    sdae.get("beta", cfg.sdae.beta);
    sdae.check_unknown();

    SectionReader ft("finetune", section("finetune"));
    ft.get("bottleneck", cfg.finetune.bottleneck);
    ft.get("local_hidden", cfg.finetune.local_hidden);
    ft.get("global_hidden", cfg.finetune.global_hidden);
    ft.get("epochs", cfg.finetune.epochs);
    ft.get("lr", cfg.finetune.lr);
    ft.get("batch", cfg.finetune.batch_size);
    ft.get("lambda", cfg.finetune.lambda);
    ft.get("gamma", cfg.finetune.gamma);
    ft.check_unknown();

    SectionReader fusion("fusion", section("fusion"));
    fusion.get("local_mean", cfg.finetune.fusion_local_mean);
    fusion.check_unknown();

    SectionReader run("run", section("run"));
    run.get("seed", cfg.seed);
    run.get("out", cfg.out_dir);
    run.get("parallel_channels", cfg.parallel_channels);
    run.get("parallel_folds", cfg.parallel_folds);
    run.check_unknown();

    require_unit_interval(cfg.sdae.corruption.rate, "sdae corruption rate");
    require_unit_interval(cfg.finetune.lambda, "finetune lambda");
    require_unit_interval(cfg.finetune.gamma, "finetune gamma");
    if (cfg.sdae.beta < 0.0) throw ConfigError("sdae beta must be >= 0");
    if (cfg.sdae.hidden == 0 || cfg.finetune.bottleneck == 0 ||
        cfg.finetune.local_hidden == 0 || cfg.finetune.global_hidden == 0) {
        throw ConfigError("layer widths must be >= 1");
    }
    if (cfg.sdae.lr <= 0.0 || cfg.finetune.lr <= 0.0) {
        throw ConfigError("learning rates must be positive");
    }
    if (cfg.sdae.batch_size == 0 || cfg.finetune.batch_size == 0) {
        throw ConfigError("batch sizes must be >= 1");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

}  // namespace mtcae
