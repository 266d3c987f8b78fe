#pragma once

#include "tstcc/autodiff.hpp"
#include "tstcc/errors.hpp"

#include <cstdint>
#include <numeric>
#include <vector>

namespace tstcc {

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 0.7;
    double lambda3 = 0.01;
    double lambda4 = 0.7;
    double tau = 0.2;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
            throw ConfigError("loss: lambdas must be nonnegative");
        if (tau <= 0) throw ConfigError("loss: temperature must be positive");
    }
};

// Latents and contexts of the two views at a shared anchor t (1-based prefix
// length); the context of one view predicts the other view's next K steps.
template <class T>
struct TemporalBatchViews {
    ad::Var<T> z_weak, z_strong;  // (B, d, T_z)
    ad::Var<T> c_weak, c_strong;  // (B, h)
    int64_t anchor = 0;           // t
    int64_t horizon = 0;          // K
};

// Cross-view directions are the default; the same-view directions exist for
// the "no cross-view prediction" ablation.
enum class Direction { strong_to_weak, weak_to_strong, strong_to_strong, weak_to_weak };

// InfoNCE over future latent steps: for each k the candidates are all B
// same-view latents at step t+k, the positive being the same sample.
template <class T>
ad::Var<T> temporal_contrast_loss(const TemporalBatchViews<T>& v,
                                  const std::vector<ad::Var<T>>& predictors, Direction dir) {
    const int64_t t_z = v.z_weak->value.dim(2);
    const int64_t b = v.z_weak->value.dim(0);
    if (v.anchor < 1 || v.horizon < 1 || v.anchor + v.horizon > t_z)
        throw std::invalid_argument("temporal loss: anchor/horizon out of range");
    if (static_cast<int64_t>(predictors.size()) < v.horizon)
        throw std::invalid_argument("temporal loss: missing predictors");
    const bool from_strong = dir == Direction::strong_to_weak || dir == Direction::strong_to_strong;
    const bool to_weak = dir == Direction::strong_to_weak || dir == Direction::weak_to_weak;
    const auto& ctx = from_strong ? v.c_strong : v.c_weak;
    const auto& z_tgt = to_weak ? v.z_weak : v.z_strong;
    std::vector<int64_t> diag(static_cast<size_t>(b));
    std::iota(diag.begin(), diag.end(), 0);
    ad::Var<T> total;
    for (int64_t k = 1; k <= v.horizon; ++k) {
        auto pred = ad::matmul_nt(ctx, predictors[static_cast<size_t>(k - 1)]);  // (B, d)
        auto z_k = ad::time_step(z_tgt, v.anchor + k - 1);                       // (B, d)
        auto ce = ad::cross_entropy_rows(ad::matmul_nt(pred, z_k), diag);
        total = total ? ad::add(total, ce) : ce;
    }
    return ad::scale(total, 1.0 / static_cast<double>(v.horizon));
}

// NT-Xent over projected contexts; rows (2k, 2k+1) are the two views of
// sample k and cosine similarity is used, so zero rows compare as 0.
template <class T>
ad::Var<T> contextual_contrast_loss(const ad::Var<T>& proj, double tau) {
    if (tau <= 0) throw ConfigError("contextual loss: temperature must be positive");
    if (proj->value.rank() != 2 || proj->value.dim(0) % 2 != 0)
        throw std::invalid_argument("contextual loss: need (2N, p) projections");
    auto sim = ad::matmul_nt(ad::l2_normalize_rows(proj), ad::l2_normalize_rows(proj));
    return ad::nt_xent_from_sim(sim, tau);
}

// Class-aware variant: positives of anchor i are all other rows sharing its
// label. By default the sum over anchors is divided by 2N so the magnitude is
// batch-size independent; raw_sum=false disables only that normalization.
template <class T>
ad::Var<T> supervised_contextual_contrast_loss(const ad::Var<T>& proj,
                                               const std::vector<int64_t>& labels, double tau,
                                               bool mean_over_anchors = true) {
    if (tau <= 0) throw ConfigError("supervised contextual loss: temperature must be positive");
    const int64_t m = proj->value.dim(0);
    if (proj->value.rank() != 2 || m % 2 != 0 || static_cast<int64_t>(labels.size()) != m)
        throw std::invalid_argument("supervised contextual loss: need (2N, p) rows with 2N labels");
    for (int64_t i = 0; i < m; i += 2)
        if (labels[static_cast<size_t>(i)] != labels[static_cast<size_t>(i) + 1])
            throw std::invalid_argument("supervised contextual loss: views must share labels");
    auto sim = ad::matmul_nt(ad::l2_normalize_rows(proj), ad::l2_normalize_rows(proj));
    return ad::supcon_from_sim(sim, labels, tau, mean_over_anchors);
}

template <class T>
ad::Var<T> cross_entropy(const ad::Var<T>& logits, const std::vector<int64_t>& labels) {
    return ad::cross_entropy_rows(logits, labels);
}

template <class T>
ad::Var<T> combine_unsup(const ad::Var<T>& l_tc_s, const ad::Var<T>& l_tc_w,
                         const ad::Var<T>& l_cc, const LossWeights& w) {
    auto tc = ad::scale(ad::add(l_tc_s, l_tc_w), w.lambda1);
    return ad::add(tc, ad::scale(l_cc, w.lambda2));
}

template <class T>
ad::Var<T> combine_semi(const ad::Var<T>& l_tc_s, const ad::Var<T>& l_tc_w,
                        const ad::Var<T>& l_scc, const LossWeights& w) {
    auto tc = ad::scale(ad::add(l_tc_s, l_tc_w), w.lambda3);
    return ad::add(tc, ad::scale(l_scc, w.lambda4));
}

inline double combine_unsup_value(double l_tc_s, double l_tc_w, double l_cc,
                                  const LossWeights& w) {
    return w.lambda1 * (l_tc_s + l_tc_w) + w.lambda2 * l_cc;
}

inline double combine_semi_value(double l_tc_s, double l_tc_w, double l_scc,
                                 const LossWeights& w) {
    return w.lambda3 * (l_tc_s + l_tc_w) + w.lambda4 * l_scc;
}

}  // namespace tstcc
