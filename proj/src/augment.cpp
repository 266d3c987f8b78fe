#include "tstcc/augment.hpp"

#include "tstcc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tstcc {

namespace {

void check_bct(const Tensor<float>& x, const char* who) {
    if (x.rank() != 3) throw std::invalid_argument(std::string(who) + ": expected (B,C,T) tensor");
}

}  // namespace

void AugmentConfig::validate(int64_t timesteps) const {
    if (weak_jitter_sigma < 0 || weak_jitter_sigma > 0.1)
        throw ConfigError("augment: weak_jitter_sigma must be in [0, 0.1]");
    if (weak_scale_sigma <= 0) throw ConfigError("augment: weak_scale_sigma must be positive");
    if (strong_jitter_sigma < 0.1 || strong_jitter_sigma > 1.0)
        throw ConfigError("augment: strong_jitter_sigma must be in [0.1, 1]");
    if (max_segments < 1) throw ConfigError("augment: max_segments must be >= 1");
    if (max_segments > timesteps)
        throw ConfigError("augment: max_segments exceeds sample length");
    if (time_shift_max < 0 || time_shift_max >= timesteps)
        throw ConfigError("augment: time_shift_max must be in [0, T)");
}

Tensor<float> jitter(const Tensor<float>& x, double sigma, RngStream rng) {
    check_bct(x, "jitter");
    if (sigma < 0) throw std::invalid_argument("jitter: sigma must be >= 0");
    if (sigma == 0) return x;
    const int64_t b = x.dim(0), span = x.dim(1) * x.dim(2);
    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < b; ++i) {
        RngStream s = rng.split(static_cast<uint64_t>(i));
        const float* src = x.data() + i * span;
        float* dst = out.data() + i * span;
        for (int64_t j = 0; j < span; ++j)
            dst[j] = src[j] + static_cast<float>(sigma * s.normal());
    }
    return out;
}

Tensor<float> scale(const Tensor<float>& x, double scale_sigma, RngStream rng) {
    check_bct(x, "scale");
    if (scale_sigma <= 0) throw std::invalid_argument("scale: scale_sigma must be > 0");
    const int64_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
    const double sigma = 0.1 * scale_sigma;
    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < b; ++i) {
        RngStream s = rng.split(static_cast<uint64_t>(i));
        for (int64_t ch = 0; ch < c; ++ch) {
            const double factor = std::max(0.01, 1.0 + sigma * s.normal());
            for (int64_t j = 0; j < t; ++j)
                out.at3(i, ch, j) = static_cast<float>(x.at3(i, ch, j) * factor);
        }
    }
    return out;
}

Tensor<float> permute_segments(const Tensor<float>& x, int64_t max_segments, RngStream rng) {
    check_bct(x, "permute_segments");
    const int64_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
    if (max_segments < 1 || max_segments > t)
        throw std::invalid_argument("permute_segments: need 1 <= M <= T");
    if (max_segments == 1) return x;

    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < b; ++i) {
        RngStream s = rng.split(static_cast<uint64_t>(i));
        const int64_t m = 1 + static_cast<int64_t>(s.below(static_cast<uint64_t>(max_segments)));
        // m-1 distinct cut positions from the interior {1..T-1}
        std::vector<int64_t> cuts;
        if (m > 1) {
            std::vector<int64_t> interior(static_cast<size_t>(t - 1));
            std::iota(interior.begin(), interior.end(), 1);
            for (int64_t j = 0; j < m - 1; ++j) {
                const size_t pick = static_cast<size_t>(j) +
                                    static_cast<size_t>(s.below(interior.size() - static_cast<size_t>(j)));
                std::swap(interior[static_cast<size_t>(j)], interior[pick]);
                cuts.push_back(interior[static_cast<size_t>(j)]);
            }
            std::sort(cuts.begin(), cuts.end());
        }
        std::vector<std::pair<int64_t, int64_t>> segs;  // [begin, end)
        int64_t begin = 0;
        for (int64_t cut : cuts) {
            segs.emplace_back(begin, cut);
            begin = cut;
        }
        segs.emplace_back(begin, t);

        std::vector<int64_t> perm(segs.size());
        std::iota(perm.begin(), perm.end(), 0);
        for (size_t j = perm.size(); j > 1; --j) std::swap(perm[j - 1], perm[s.below(j)]);

        for (int64_t ch = 0; ch < c; ++ch) {
            int64_t w = 0;
            for (int64_t p : perm) {
                const auto [sb, se] = segs[static_cast<size_t>(p)];
                for (int64_t j = sb; j < se; ++j) out.at3(i, ch, w++) = x.at3(i, ch, j);
            }
        }
    }
    return out;
}

Tensor<float> time_shift(const Tensor<float>& x, int64_t max_shift, RngStream rng) {
    check_bct(x, "time_shift");
    const int64_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
    if (max_shift < 0 || max_shift >= t)
        throw std::invalid_argument("time_shift: need 0 <= max_shift < T");
    if (max_shift == 0) return x;
    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < b; ++i) {
        RngStream s = rng.split(static_cast<uint64_t>(i));
        const int64_t shift =
            static_cast<int64_t>(s.below(static_cast<uint64_t>(2 * max_shift + 1))) - max_shift;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t j = 0; j < t; ++j) {
                int64_t src = (j - shift) % t;
                if (src < 0) src += t;
                out.at3(i, ch, j) = x.at3(i, ch, src);
            }
    }
    return out;
}

// Default weak family is scale + jitter; a nonzero time_shift_max switches to
// the alternative shift + jitter family.
Batch weak_augment(const Batch& b, const AugmentConfig& cfg, RngStream rng) {
    Batch out;
    Tensor<float> base = cfg.time_shift_max > 0
                             ? time_shift(b.x, cfg.time_shift_max, rng.split(0))
                             : scale(b.x, cfg.weak_scale_sigma, rng.split(0));
    out.x = jitter(base, cfg.weak_jitter_sigma, rng.split(1));
    out.y = b.y;
    return out;
}

Batch strong_augment(const Batch& b, const AugmentConfig& cfg, RngStream rng) {
    Batch out;
    out.x = jitter(permute_segments(b.x, cfg.max_segments, rng.split(0)), cfg.strong_jitter_sigma,
                   rng.split(1));
    out.y = b.y;
    return out;
}

ViewPair make_view_pair(const Batch& b, const AugmentConfig& cfg, RngStream rng,
                        ViewFamily family) {
    ViewPair vp;
    vp.source = b;
    switch (family) {
        case ViewFamily::weak_strong:
            vp.weak = weak_augment(b, cfg, rng.split(0));
            vp.strong = strong_augment(b, cfg, rng.split(1));
            break;
        case ViewFamily::weak_only:
            vp.weak = weak_augment(b, cfg, rng.split(0));
            vp.strong = weak_augment(b, cfg, rng.split(1));
            break;
        case ViewFamily::strong_only:
            vp.weak = strong_augment(b, cfg, rng.split(0));
            vp.strong = strong_augment(b, cfg, rng.split(1));
            break;
    }
    return vp;
}

}  // namespace tstcc
