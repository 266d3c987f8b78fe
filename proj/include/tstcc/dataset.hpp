#pragma once

#include "tstcc/errors.hpp"
#include "tstcc/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tstcc {

// A set of multichannel time series with per-sample integer labels.
// Label -1 marks "unlabeled". Label reads can be trapped, which lets tests
// prove that unsupervised training phases never touch them.
class Dataset {
public:
    Dataset() = default;
    Dataset(Tensor<float> samples, std::vector<int64_t> labels, int64_t num_classes,
            std::string name = "");

    int64_t n() const { return samples_.rank() == 3 ? samples_.dim(0) : 0; }
    int64_t channels() const { return samples_.dim(1); }
    int64_t timesteps() const { return samples_.dim(2); }
    int64_t num_classes() const { return num_classes_; }
    const std::string& name() const { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    const Tensor<float>& samples() const { return samples_; }
    Tensor<float>& samples() { return samples_; }

    const std::vector<int64_t>& labels() const;
    int64_t label(int64_t i) const;
    void set_label(int64_t i, int64_t value);

    // While trapped, any label read throws; sample access is unaffected.
    void trap_labels(bool on) { trap_ = on; }

    bool fully_labeled() const;

private:
    Tensor<float> samples_;        // (N, C, T)
    std::vector<int64_t> labels_;  // length N, -1 = unlabeled
    int64_t num_classes_ = 0;
    std::string name_;
    bool trap_ = false;
};

struct Batch {
    Tensor<float> x;         // (B, C, T)
    std::vector<int64_t> y;  // length B, -1 allowed
};

struct LabeledSplit {
    Dataset labeled;
    Dataset unlabeled;
    double fraction = 0;
    uint64_t seed = 0;
};

// Per-channel min/max over a whole dataset; reused to scale test data with
// the training statistics.
struct NormStats {
    std::vector<float> min;
    std::vector<float> max;
};

// TSD1 container (little-endian): "TSD1", u32 version=1, u64 N, u32 C,
// u32 T, u32 K_cls, N*C*T float32 samples in (sample, channel, time) order,
// N int64 labels.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& d, const std::string& path);

// CSV rows of C*T floats plus a final integer label column.
Dataset dataset_from_csv(const std::string& path, int64_t channels, int64_t timesteps,
                         int64_t num_classes);

NormStats compute_minmax(const Dataset& d);
Dataset apply_minmax(const Dataset& d, const NormStats& stats);
Dataset normalize_minmax(const Dataset& d);

// Seeded stratified split; every class appears in the labeled part at least
// once and the unlabeled part has its labels overwritten to -1.
LabeledSplit split_labeled_subset(const Dataset& d, double fraction, uint64_t seed);

// Sinusoid classes: class k has frequency (k+1)/T * F_base with a seeded
// class/channel phase, plus white noise.
Dataset make_synthetic(int64_t n_per_class, int64_t channels, int64_t timesteps,
                       int64_t num_classes, double noise_sigma, uint64_t seed);

// Single-pass batch view over a dataset; covers every sample exactly once,
// last batch may be short. Without a shuffle seed, original order is kept.
// include_labels=false fills y with -1 and never reads the dataset's labels.
class BatchIterator {
public:
    BatchIterator(const Dataset& d, int64_t batch_size, std::optional<uint64_t> shuffle_seed,
                  bool include_labels = true);

    bool next(Batch& out);
    void reset() { cursor_ = 0; }

private:
    const Dataset& data_;
    std::vector<int64_t> order_;
    int64_t batch_size_;
    int64_t cursor_ = 0;
    bool include_labels_;
};

// Concatenates datasets with identical (C, T, K_cls).
Dataset concat_datasets(const Dataset& a, const Dataset& b);

}  // namespace tstcc
