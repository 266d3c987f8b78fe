#include "tstcc/config.hpp"

#include "tstcc/errors.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tstcc {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

int64_t parse_int(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
    }
}

uint64_t parse_uint(const std::string& v, const std::string& where) {
    const int64_t out = parse_int(v, where);
    if (out < 0) throw ConfigError(where + ": expected a nonnegative integer");
    return static_cast<uint64_t>(out);
}

double parse_real(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    }
}

}  // namespace

ModelConfig RunConfig::model_config(int64_t in_channels, int64_t timesteps,
                                    int64_t num_classes) const {
    ModelConfig mc;
    mc.in_channels = in_channels;
    mc.timesteps = timesteps;
    mc.num_classes = num_classes;
    mc.conv_channels = {conv_channels1, conv_channels2};
    mc.feature_dim = feature_dim;
    mc.conv_width = conv_width;
    mc.conv_dropout = conv_dropout;
    mc.hidden_dim = hidden_dim;
    mc.layers = layers;
    mc.heads = heads;
    mc.dropout = dropout;
    mc.pred_ratio = pred_ratio;
    return mc;
}

void RunConfig::validate() const {
    if (epochs < 0 || finetune_epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(labels_fraction > 0.0) || labels_fraction > 1.0)
        throw ConfigError("train: labels_fraction must be in (0, 1]");
    if (pseudo_threshold < 0 || pseudo_threshold >= 1)
        throw ConfigError("train: pseudo_threshold must be in [0, 1)");
    weights.validate();
    if (contextual == ContextualMode::sup && labels_fraction <= 0)
        throw ConfigError("ablation: supervised contextual mode needs labels");
    if (synth_n_per_class < 1 || synth_channels < 1 || synth_timesteps < 1 || synth_classes < 1)
        throw ConfigError("synth: all sizes must be >= 1");
    if (synth_noise_sigma < 0) throw ConfigError("synth: noise_sigma must be >= 0");
}

std::string RunConfig::snapshot() const {
    std::ostringstream os;
    os.precision(17);
    auto mode_str = [](ContextualMode m) {
        return m == ContextualMode::off ? "off" : m == ContextualMode::unsup ? "unsup" : "sup";
    };
    auto views_str = [](ViewFamily v) {
        return v == ViewFamily::weak_strong ? "weak_strong"
               : v == ViewFamily::weak_only ? "weak_only"
                                            : "strong_only";
    };
    os << "[data]\n"
       << "train = " << train_path << "\n"
       << "test = " << test_path << "\n"
       << "normalize = " << (normalize ? "true" : "false") << "\n\n";
    os << "[train]\n"
       << "epochs = " << epochs << "\n"
       << "finetune_epochs = " << finetune_epochs << "\n"
       << "batch_size = " << batch_size << "\n"
       << "seed = " << seed << "\n"
       << "labels_fraction = " << labels_fraction << "\n"
       << "out_dir = " << out_dir << "\n"
       << "eval = " << (eval == EvalMode::finetune ? "finetune" : "linear") << "\n"
       << "pseudo_threshold = " << pseudo_threshold << "\n\n";
    os << "[model]\n"
       << "feature_dim = " << feature_dim << "\n"
       << "hidden_dim = " << hidden_dim << "\n"
       << "layers = " << layers << "\n"
       << "heads = " << heads << "\n"
       << "dropout = " << dropout << "\n"
       << "conv_channels1 = " << conv_channels1 << "\n"
       << "conv_channels2 = " << conv_channels2 << "\n"
       << "conv_width = " << conv_width << "\n"
       << "conv_dropout = " << conv_dropout << "\n\n";
    os << "[loss]\n"
       << "lambda1 = " << weights.lambda1 << "\n"
       << "lambda2 = " << weights.lambda2 << "\n"
       << "lambda3 = " << weights.lambda3 << "\n"
       << "lambda4 = " << weights.lambda4 << "\n"
       << "tau = " << weights.tau << "\n"
       << "pred_ratio = " << pred_ratio << "\n"
       << "scc_raw_sum = " << (scc_raw_sum ? "true" : "false") << "\n\n";
    os << "[augment]\n"
       << "weak_jitter_sigma = " << augment.weak_jitter_sigma << "\n"
       << "weak_scale_sigma = " << augment.weak_scale_sigma << "\n"
       << "strong_jitter_sigma = " << augment.strong_jitter_sigma << "\n"
       << "max_segments = " << augment.max_segments << "\n"
       << "time_shift_max = " << augment.time_shift_max << "\n\n";
    os << "[ablation]\n"
       << "cross_view = " << (cross_view ? "true" : "false") << "\n"
       << "contextual = " << mode_str(contextual) << "\n"
       << "views = " << views_str(views) << "\n\n";
    os << "[synth]\n"
       << "n_per_class = " << synth_n_per_class << "\n"
       << "channels = " << synth_channels << "\n"
       << "timesteps = " << synth_timesteps << "\n"
       << "classes = " << synth_classes << "\n"
       << "noise_sigma = " << synth_noise_sigma << "\n"
       << "seed = " << synth_seed << "\n"
       << "out_train = " << synth_out_train << "\n"
       << "out_test = " << synth_out_test << "\n";
    return os.str();
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    std::map<std::string, Setter> keys;

    auto reg = [&](const std::string& name, Setter fn) { keys[name] = std::move(fn); };

    reg("data.train", [&](const std::string& v, const std::string&) { cfg.train_path = v; });
    reg("data.test", [&](const std::string& v, const std::string&) { cfg.test_path = v; });
    reg("data.normalize",
        [&](const std::string& v, const std::string& w) { cfg.normalize = parse_bool(v, w); });

    reg("train.epochs",
        [&](const std::string& v, const std::string& w) { cfg.epochs = parse_int(v, w); });
    reg("train.finetune_epochs",
        [&](const std::string& v, const std::string& w) { cfg.finetune_epochs = parse_int(v, w); });
    reg("train.batch_size",
        [&](const std::string& v, const std::string& w) { cfg.batch_size = parse_int(v, w); });
    reg("train.seed",
        [&](const std::string& v, const std::string& w) { cfg.seed = parse_uint(v, w); });
    reg("train.labels_fraction", [&](const std::string& v, const std::string& w) {
        cfg.labels_fraction = parse_real(v, w);
    });
    reg("train.out_dir", [&](const std::string& v, const std::string&) { cfg.out_dir = v; });
    reg("train.eval", [&](const std::string& v, const std::string& w) {
        if (v == "finetune")
            cfg.eval = EvalMode::finetune;
        else if (v == "linear")
            cfg.eval = EvalMode::linear;
        else
            throw ConfigError(w + ": expected finetune|linear");
    });
    reg("train.pseudo_threshold", [&](const std::string& v, const std::string& w) {
        cfg.pseudo_threshold = parse_real(v, w);
    });

    reg("model.feature_dim",
        [&](const std::string& v, const std::string& w) { cfg.feature_dim = parse_int(v, w); });
    reg("model.hidden_dim",
        [&](const std::string& v, const std::string& w) { cfg.hidden_dim = parse_int(v, w); });
    reg("model.layers",
        [&](const std::string& v, const std::string& w) { cfg.layers = parse_int(v, w); });
    reg("model.heads",
        [&](const std::string& v, const std::string& w) { cfg.heads = parse_int(v, w); });
    reg("model.dropout",
        [&](const std::string& v, const std::string& w) { cfg.dropout = parse_real(v, w); });
    reg("model.conv_channels1",
        [&](const std::string& v, const std::string& w) { cfg.conv_channels1 = parse_int(v, w); });
    reg("model.conv_channels2",
        [&](const std::string& v, const std::string& w) { cfg.conv_channels2 = parse_int(v, w); });
    reg("model.conv_width",
        [&](const std::string& v, const std::string& w) { cfg.conv_width = parse_int(v, w); });
    reg("model.conv_dropout",
        [&](const std::string& v, const std::string& w) { cfg.conv_dropout = parse_real(v, w); });

    reg("loss.lambda1",
        [&](const std::string& v, const std::string& w) { cfg.weights.lambda1 = parse_real(v, w); });
    reg("loss.lambda2",
        [&](const std::string& v, const std::string& w) { cfg.weights.lambda2 = parse_real(v, w); });
    reg("loss.lambda3",
        [&](const std::string& v, const std::string& w) { cfg.weights.lambda3 = parse_real(v, w); });
    reg("loss.lambda4",
        [&](const std::string& v, const std::string& w) { cfg.weights.lambda4 = parse_real(v, w); });
    reg("loss.tau",
        [&](const std::string& v, const std::string& w) { cfg.weights.tau = parse_real(v, w); });
    reg("loss.pred_ratio",
        [&](const std::string& v, const std::string& w) { cfg.pred_ratio = parse_real(v, w); });
    reg("loss.scc_raw_sum",
        [&](const std::string& v, const std::string& w) { cfg.scc_raw_sum = parse_bool(v, w); });

    reg("augment.weak_jitter_sigma", [&](const std::string& v, const std::string& w) {
        cfg.augment.weak_jitter_sigma = parse_real(v, w);
    });
    reg("augment.weak_scale_sigma", [&](const std::string& v, const std::string& w) {
        cfg.augment.weak_scale_sigma = parse_real(v, w);
    });
    reg("augment.strong_jitter_sigma", [&](const std::string& v, const std::string& w) {
        cfg.augment.strong_jitter_sigma = parse_real(v, w);
    });
    reg("augment.max_segments", [&](const std::string& v, const std::string& w) {
        cfg.augment.max_segments = parse_int(v, w);
    });
    reg("augment.time_shift_max", [&](const std::string& v, const std::string& w) {
        cfg.augment.time_shift_max = parse_int(v, w);
    });

    reg("ablation.cross_view",
        [&](const std::string& v, const std::string& w) { cfg.cross_view = parse_bool(v, w); });
    reg("ablation.contextual", [&](const std::string& v, const std::string& w) {
        if (v == "off")
            cfg.contextual = ContextualMode::off;
        else if (v == "unsup")
            cfg.contextual = ContextualMode::unsup;
        else if (v == "sup")
            cfg.contextual = ContextualMode::sup;
        else
            throw ConfigError(w + ": expected off|unsup|sup");
    });
    reg("ablation.views", [&](const std::string& v, const std::string& w) {
        if (v == "weak_strong")
            cfg.views = ViewFamily::weak_strong;
        else if (v == "weak_only")
            cfg.views = ViewFamily::weak_only;
        else if (v == "strong_only")
            cfg.views = ViewFamily::strong_only;
        else
            throw ConfigError(w + ": expected weak_strong|weak_only|strong_only");
    });

    reg("synth.n_per_class", [&](const std::string& v, const std::string& w) {
        cfg.synth_n_per_class = parse_int(v, w);
    });
    reg("synth.channels",
        [&](const std::string& v, const std::string& w) { cfg.synth_channels = parse_int(v, w); });
    reg("synth.timesteps",
        [&](const std::string& v, const std::string& w) { cfg.synth_timesteps = parse_int(v, w); });
    reg("synth.classes",
        [&](const std::string& v, const std::string& w) { cfg.synth_classes = parse_int(v, w); });
    reg("synth.noise_sigma", [&](const std::string& v, const std::string& w) {
        cfg.synth_noise_sigma = parse_real(v, w);
    });
    reg("synth.seed",
        [&](const std::string& v, const std::string& w) { cfg.synth_seed = parse_uint(v, w); });
    reg("synth.out_train",
        [&](const std::string& v, const std::string&) { cfg.synth_out_train = v; });
    reg("synth.out_test",
        [&](const std::string& v, const std::string&) { cfg.synth_out_test = v; });

    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (section.empty()) throw ConfigError(where + ": key outside any section");
        const std::string full = section + "." + key;
        auto it = keys.find(full);
        if (it == keys.end()) throw ConfigError(where + ": unknown key '" + full + "'");
        it->second(value, where);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

void apply_ablation(RunConfig& cfg, const std::string& name) {
    if (name == "none" || name.empty()) return;
    if (name == "tc_only") {
        cfg.cross_view = false;
        cfg.contextual = ContextualMode::off;
    } else if (name == "tc_xaug") {
        cfg.cross_view = true;
        cfg.contextual = ContextualMode::off;
    } else if (name == "weak_only") {
        cfg.views = ViewFamily::weak_only;
    } else if (name == "strong_only") {
        cfg.views = ViewFamily::strong_only;
    } else {
        throw ConfigError("unknown ablation '" + name +
                          "' (expected none|tc_only|tc_xaug|weak_only|strong_only)");
    }
}

}  // namespace tstcc
