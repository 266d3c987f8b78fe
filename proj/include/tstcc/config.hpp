#pragma once

#include "tstcc/augment.hpp"
#include "tstcc/losses.hpp"
#include "tstcc/model.hpp"

#include <cstdint>
#include <string>

namespace tstcc {

enum class ContextualMode { off, unsup, sup };
enum class EvalMode { finetune, linear };

// Full description of one run: data paths, training defaults, model and loss
// hyperparameters, augmentation settings, ablation switches. File form is a
// sectioned key=value config; every CLI flag has a key here and flags win.
struct RunConfig {
    // [data]
    std::string train_path;
    std::string test_path;
    bool normalize = true;

    // [train]
    int64_t epochs = 40;
    int64_t finetune_epochs = 40;
    int64_t batch_size = 128;  // auto-shrunk to the labeled-set size when smaller
    uint64_t seed = 1;
    double labels_fraction = 1.0;
    std::string out_dir = "runs/out";
    EvalMode eval = EvalMode::finetune;
    double pseudo_threshold = 0.0;  // confidence gate for pseudo labels; 0 = keep all

    // [model]
    int64_t feature_dim = 32;
    int64_t hidden_dim = 100;
    int64_t layers = 4;
    int64_t heads = 4;
    double dropout = 0.1;
    int64_t conv_channels1 = 32;
    int64_t conv_channels2 = 64;
    int64_t conv_width = 8;
    double conv_dropout = 0.35;

    // [loss]
    LossWeights weights;
    double pred_ratio = 0.4;
    bool scc_raw_sum = false;

    // [augment]
    AugmentConfig augment;

    // [ablation]
    bool cross_view = true;
    ContextualMode contextual = ContextualMode::unsup;
    ViewFamily views = ViewFamily::weak_strong;

    // [synth]
    int64_t synth_n_per_class = 200;
    int64_t synth_channels = 1;
    int64_t synth_timesteps = 128;
    int64_t synth_classes = 3;
    double synth_noise_sigma = 0.3;
    uint64_t synth_seed = 1;
    std::string synth_out_train = "train.tsd";
    std::string synth_out_test = "test.tsd";

    ModelConfig model_config(int64_t in_channels, int64_t timesteps, int64_t num_classes) const;
    void validate() const;

    // Serializes the resolved config; parse_config(snapshot) round-trips.
    std::string snapshot() const;
};

// Strict sectioned key=value parser; unknown sections or keys are rejected.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

// Applies an --ablation name: none, tc_only, tc_xaug, weak_only, strong_only.
void apply_ablation(RunConfig& cfg, const std::string& name);

}  // namespace tstcc
