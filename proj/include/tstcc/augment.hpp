#pragma once

#include "tstcc/dataset.hpp"
#include "tstcc/rng.hpp"
#include "tstcc/tensor.hpp"

namespace tstcc {

// Weak view = scale then jitter with small noise; strong view = segment
// permutation then jitter with larger noise. Ranges follow the recommended
// settings for signals normalized into [0, 1].
struct AugmentConfig {
    double weak_jitter_sigma = 0.05;   // in [0, 0.1]
    double weak_scale_sigma = 2.0;     // scaling ratio; factor ~ N(1, 0.1*ratio)
    double strong_jitter_sigma = 0.1;  // in [0.1, 1]
    int64_t max_segments = 10;         // M, >= 1 and <= T
    int64_t time_shift_max = 0;        // optional weak alternative

    void validate(int64_t timesteps) const;
};

struct ViewPair {
    Batch weak;
    Batch strong;
    Batch source;
};

// All transforms keep tensor shape and are deterministic functions of
// (input, parameters, rng stream). Each sample consumes its own substream,
// so batches can be augmented in parallel later without changing results.
Tensor<float> jitter(const Tensor<float>& x, double sigma, RngStream rng);
Tensor<float> scale(const Tensor<float>& x, double scale_sigma, RngStream rng);
Tensor<float> permute_segments(const Tensor<float>& x, int64_t max_segments, RngStream rng);
Tensor<float> time_shift(const Tensor<float>& x, int64_t max_shift, RngStream rng);

Batch weak_augment(const Batch& b, const AugmentConfig& cfg, RngStream rng);
Batch strong_augment(const Batch& b, const AugmentConfig& cfg, RngStream rng);

enum class ViewFamily { weak_strong, weak_only, strong_only };

ViewPair make_view_pair(const Batch& b, const AugmentConfig& cfg, RngStream rng,
                        ViewFamily family = ViewFamily::weak_strong);

}  // namespace tstcc
