#pragma once

#include "tstcc/autodiff.hpp"
#include "tstcc/errors.hpp"
#include "tstcc/rng.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace tstcc {

// Architecture hyperparameters. The encoder is three blocks of
// conv('same', stride 1) -> batch norm -> ReLU -> max pool(2) with dropout
// after block 1; the context model is a pre-norm transformer with a learned
// token whose final state summarizes the sequence.
struct ModelConfig {
    int64_t in_channels = 1;
    int64_t timesteps = 128;
    int64_t num_classes = 2;

    std::array<int64_t, 2> conv_channels = {32, 64};
    int64_t feature_dim = 32;  // d, channels of block 3
    int64_t conv_width = 8;
    double conv_dropout = 0.35;

    int64_t hidden_dim = 100;  // h
    int64_t layers = 4;        // L
    int64_t heads = 4;
    double dropout = 0.1;
    double pred_ratio = 0.4;  // K = max(1, floor(ratio * T_z))

    int64_t latent_timesteps() const {
        int64_t t = timesteps;
        for (int i = 0; i < 3; ++i) t /= 2;
        return t;
    }

    int64_t horizon() const {
        const int64_t k = static_cast<int64_t>(pred_ratio * static_cast<double>(latent_timesteps()));
        return k < 1 ? 1 : k;
    }

    void validate() const {
        if (in_channels < 1 || num_classes < 1) throw ConfigError("model: bad data dims");
        if (timesteps < conv_width)
            throw ConfigError("model: sample length " + std::to_string(timesteps) +
                              " shorter than receptive field " + std::to_string(conv_width));
        if (latent_timesteps() < 2)
            throw ConfigError("model: sample length too short, latent sequence collapses");
        if (hidden_dim % heads != 0) throw ConfigError("model: hidden_dim must divide by heads");
        if (hidden_dim % 2 != 0) throw ConfigError("model: hidden_dim must be even");
        if (layers < 0 || heads < 1 || feature_dim < 1) throw ConfigError("model: bad sizes");
        if (dropout < 0 || dropout >= 1 || conv_dropout < 0 || conv_dropout >= 1)
            throw ConfigError("model: dropout must be in [0, 1)");
        if (pred_ratio <= 0 || pred_ratio >= 1) throw ConfigError("model: pred_ratio in (0,1)");
        if (horizon() >= latent_timesteps())
            throw ConfigError("model: prediction horizon leaves no anchor positions");
    }
};

template <class T>
struct ConvBlock {
    ad::Var<T> w, b, gamma, beta;
    Tensor<T> running_mean, running_var;
};

template <class T>
struct TransformerLayer {
    ad::Var<T> norm1_g, norm1_b;
    ad::Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Var<T> norm2_g, norm2_b;
    ad::Var<T> w1, b1, w2, b2;
};

template <class T>
struct Model {
    ModelConfig cfg;

    std::array<ConvBlock<T>, 3> enc;
    ad::Var<T> w_tran;                          // (h, d)
    ad::Var<T> token;                           // (h)
    std::vector<TransformerLayer<T>> layers;    // L
    std::vector<ad::Var<T>> predictors;         // K tensors of (d, h)
    ad::Var<T> proj_w1, proj_b1, proj_w2, proj_b2;  // h -> h -> h/2
    ad::Var<T> cls_w, cls_b;                    // (K_cls, d*T_z)

    // ---- construction ----

    static Model init(const ModelConfig& cfg, RngStream rng) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        auto uniform = [&](std::vector<int64_t> shape, double bound, RngStream& s) {
            Tensor<T> t(std::move(shape));
            for (int64_t i = 0; i < t.numel(); ++i)
                t[i] = static_cast<T>(bound * (2.0 * s.uniform() - 1.0));
            return ad::parameter(std::move(t));
        };
        auto zeros = [](std::vector<int64_t> shape) {
            return ad::parameter(Tensor<T>(std::move(shape)));
        };
        auto ones = [](std::vector<int64_t> shape) {
            return ad::parameter(Tensor<T>::full(std::move(shape), T(1)));
        };

        RngStream s = rng.split(0);
        const std::array<int64_t, 4> chans = {cfg.in_channels, cfg.conv_channels[0],
                                              cfg.conv_channels[1], cfg.feature_dim};
        for (int i = 0; i < 3; ++i) {
            const int64_t ci = chans[static_cast<size_t>(i)], co = chans[static_cast<size_t>(i) + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(ci * cfg.conv_width));
            m.enc[static_cast<size_t>(i)].w = uniform({co, ci, cfg.conv_width}, bound, s);
            m.enc[static_cast<size_t>(i)].b = uniform({co}, bound, s);
            m.enc[static_cast<size_t>(i)].gamma = ones({co});
            m.enc[static_cast<size_t>(i)].beta = zeros({co});
            m.enc[static_cast<size_t>(i)].running_mean = Tensor<T>({co});
            m.enc[static_cast<size_t>(i)].running_var = Tensor<T>::full({co}, T(1));
        }

        const int64_t h = cfg.hidden_dim, d = cfg.feature_dim;
        m.w_tran = uniform({h, d}, 1.0 / std::sqrt(static_cast<double>(d)), s);
        {
            Tensor<T> tok({h});
            for (int64_t i = 0; i < h; ++i) tok[i] = static_cast<T>(0.02 * s.normal());
            m.token = ad::parameter(std::move(tok));
        }
        const double hb = 1.0 / std::sqrt(static_cast<double>(h));
        m.layers.resize(static_cast<size_t>(cfg.layers));
        for (auto& ly : m.layers) {
            ly.norm1_g = ones({h});
            ly.norm1_b = zeros({h});
            ly.wq = uniform({h, h}, hb, s);
            ly.bq = zeros({h});
            ly.wk = uniform({h, h}, hb, s);
            ly.bk = zeros({h});
            ly.wv = uniform({h, h}, hb, s);
            ly.bv = zeros({h});
            ly.wo = uniform({h, h}, hb, s);
            ly.bo = zeros({h});
            ly.norm2_g = ones({h});
            ly.norm2_b = zeros({h});
            ly.w1 = uniform({4 * h, h}, hb, s);
            ly.b1 = zeros({4 * h});
            ly.w2 = uniform({h, 4 * h}, 1.0 / std::sqrt(static_cast<double>(4 * h)), s);
            ly.b2 = zeros({h});
        }
        m.predictors.resize(static_cast<size_t>(cfg.horizon()));
        for (auto& w : m.predictors) w = uniform({d, h}, hb, s);

        m.proj_w1 = uniform({h, h}, hb, s);
        m.proj_b1 = zeros({h});
        m.proj_w2 = uniform({h / 2, h}, hb, s);
        m.proj_b2 = zeros({h / 2});
        const int64_t feat = d * cfg.latent_timesteps();
        m.cls_w = uniform({cfg.num_classes, feat}, 1.0 / std::sqrt(static_cast<double>(feat)), s);
        m.cls_b = zeros({cfg.num_classes});
        return m;
    }

    // Reinitializes transformer, predictors and projection head while keeping
    // the (typically fine-tuned) encoder and classifier.
    void reinit_context_modules(RngStream rng) {
        Model fresh = Model::init(cfg, rng);
        w_tran = fresh.w_tran;
        token = fresh.token;
        layers = std::move(fresh.layers);
        predictors = std::move(fresh.predictors);
        proj_w1 = fresh.proj_w1;
        proj_b1 = fresh.proj_b1;
        proj_w2 = fresh.proj_w2;
        proj_b2 = fresh.proj_b2;
    }

    // ---- forward passes ----

    // x (B,C,T) -> latent sequence (B,d,T_z). Training mode updates the batch
    // norm running buffers.
    ad::Var<T> encoder_forward(const Tensor<T>& x, bool training, RngStream rng) {
        if (x.rank() != 3 || x.dim(1) != cfg.in_channels)
            throw std::invalid_argument("encoder: input " + x.shape_str() + " does not match config");
        if (x.dim(2) != cfg.timesteps)
            throw std::invalid_argument("encoder: sample length " + std::to_string(x.dim(2)) +
                                        " does not match config " + std::to_string(cfg.timesteps));
        auto h = ad::constant(x);
        for (size_t i = 0; i < 3; ++i) {
            auto& blk = enc[i];
            h = ad::conv1d_same(h, blk.w, blk.b);
            h = ad::batchnorm1d(h, blk.gamma, blk.beta, blk.running_mean, blk.running_var,
                                training);
            h = ad::relu(h);
            h = ad::maxpool2(h);
            if (i == 0) h = ad::dropout(h, cfg.conv_dropout, rng.split(7), training);
        }
        return h;
    }

    // z_prefix (B,d,t) -> context vector (B,h): project timesteps, prepend the
    // token, run L pre-norm layers, return the token's final state.
    ad::Var<T> transformer_context(const ad::Var<T>& z_prefix, bool training, RngStream rng,
                                   std::vector<Tensor<T>>* attention_out = nullptr) const {
        const int64_t t = z_prefix->value.dim(2);
        if (t < 1 || t > cfg.latent_timesteps())
            throw std::invalid_argument("transformer: prefix length out of range");
        auto seq = ad::bct_to_btc(z_prefix);               // (B,t,d)
        auto proj = ad::linear(seq, w_tran, ad::Var<T>{});  // (B,t,h)
        auto x = ad::prepend_token(token, proj);           // (B,t+1,h)
        const int64_t dh = cfg.hidden_dim / cfg.heads;
        const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
        int layer_idx = 0;
        for (const auto& ly : layers) {
            RngStream lrng = rng.split(static_cast<uint64_t>(layer_idx++));
            auto n1 = ad::layernorm(x, ly.norm1_g, ly.norm1_b);
            auto q = ad::split_heads(ad::linear(n1, ly.wq, ly.bq), cfg.heads);
            auto k = ad::split_heads(ad::linear(n1, ly.wk, ly.bk), cfg.heads);
            auto v = ad::split_heads(ad::linear(n1, ly.wv, ly.bv), cfg.heads);
            auto att = ad::softmax_lastdim(ad::scale(ad::bmm_nt(q, k), att_scale));
            if (attention_out) attention_out->push_back(att->value);
            att = ad::dropout(att, cfg.dropout, lrng.split(0), training);
            auto ctx = ad::merge_heads(ad::bmm_nn(att, v), cfg.heads);
            x = ad::add(x, ad::linear(ctx, ly.wo, ly.bo));
            auto n2 = ad::layernorm(x, ly.norm2_g, ly.norm2_b);
            auto mid = ad::dropout(ad::relu(ad::linear(n2, ly.w1, ly.b1)), cfg.dropout,
                                   lrng.split(1), training);
            x = ad::add(x, ad::linear(mid, ly.w2, ly.b2));
        }
        return ad::row0(x);
    }

    // W_k c_t for the k-th future step, k in [1, K].
    ad::Var<T> predict_future(const ad::Var<T>& context, int64_t k) const {
        if (k < 1 || k > static_cast<int64_t>(predictors.size()))
            throw std::out_of_range("predict_future: k out of range");
        return ad::matmul_nt(context, predictors[static_cast<size_t>(k - 1)]);
    }

    // (B,h) -> (B,h/2)
    ad::Var<T> projection_head_forward(const ad::Var<T>& context) const {
        return ad::linear(ad::relu(ad::linear(context, proj_w1, proj_b1)), proj_w2, proj_b2);
    }

    // latent sequence (B,d,T_z) -> logits (B,K_cls)
    ad::Var<T> classifier_forward(const ad::Var<T>& z) const {
        return ad::linear(ad::flatten2(z), cls_w, cls_b);
    }

    // ---- parameter enumeration ----

    std::vector<std::pair<std::string, ad::Var<T>>> named_params() {
        std::vector<std::pair<std::string, ad::Var<T>>> out;
        for (size_t i = 0; i < 3; ++i) {
            const std::string p = "enc.b" + std::to_string(i) + ".";
            out.emplace_back(p + "w", enc[i].w);
            out.emplace_back(p + "bias", enc[i].b);
            out.emplace_back(p + "bn.gamma", enc[i].gamma);
            out.emplace_back(p + "bn.beta", enc[i].beta);
        }
        out.emplace_back("tr.w_tran", w_tran);
        out.emplace_back("tr.token", token);
        for (size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "tr.layer" + std::to_string(l) + ".";
            auto& ly = layers[l];
            out.emplace_back(p + "norm1.g", ly.norm1_g);
            out.emplace_back(p + "norm1.b", ly.norm1_b);
            out.emplace_back(p + "wq", ly.wq);
            out.emplace_back(p + "bq", ly.bq);
            out.emplace_back(p + "wk", ly.wk);
            out.emplace_back(p + "bk", ly.bk);
            out.emplace_back(p + "wv", ly.wv);
            out.emplace_back(p + "bv", ly.bv);
            out.emplace_back(p + "wo", ly.wo);
            out.emplace_back(p + "bo", ly.bo);
            out.emplace_back(p + "norm2.g", ly.norm2_g);
            out.emplace_back(p + "norm2.b", ly.norm2_b);
            out.emplace_back(p + "mlp.w1", ly.w1);
            out.emplace_back(p + "mlp.b1", ly.b1);
            out.emplace_back(p + "mlp.w2", ly.w2);
            out.emplace_back(p + "mlp.b2", ly.b2);
        }
        for (size_t k = 0; k < predictors.size(); ++k)
            out.emplace_back("pred.w" + std::to_string(k + 1), predictors[k]);
        out.emplace_back("head.proj.w1", proj_w1);
        out.emplace_back("head.proj.b1", proj_b1);
        out.emplace_back("head.proj.w2", proj_w2);
        out.emplace_back("head.proj.b2", proj_b2);
        out.emplace_back("head.cls.w", cls_w);
        out.emplace_back("head.cls.b", cls_b);
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_buffers() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (size_t i = 0; i < 3; ++i) {
            const std::string p = "enc.b" + std::to_string(i) + ".bn.";
            out.emplace_back(p + "rmean", &enc[i].running_mean);
            out.emplace_back(p + "rvar", &enc[i].running_var);
        }
        return out;
    }

    std::vector<ad::Var<T>> encoder_params() {
        std::vector<ad::Var<T>> out;
        for (auto& blk : enc) {
            out.push_back(blk.w);
            out.push_back(blk.b);
            out.push_back(blk.gamma);
            out.push_back(blk.beta);
        }
        return out;
    }

    std::vector<ad::Var<T>> classifier_params() { return {cls_w, cls_b}; }

    std::vector<ad::Var<T>> pretrain_params() {
        std::vector<ad::Var<T>> out = encoder_params();
        out.push_back(w_tran);
        out.push_back(token);
        for (auto& ly : layers) {
            for (auto* v : {&ly.norm1_g, &ly.norm1_b, &ly.wq, &ly.bq, &ly.wk, &ly.bk, &ly.wv,
                            &ly.bv, &ly.wo, &ly.bo, &ly.norm2_g, &ly.norm2_b, &ly.w1, &ly.b1,
                            &ly.w2, &ly.b2})
                out.push_back(*v);
        }
        for (auto& w : predictors) out.push_back(w);
        out.push_back(proj_w1);
        out.push_back(proj_b1);
        out.push_back(proj_w2);
        out.push_back(proj_b2);
        return out;
    }
};

// Exact reverse-mode gradients of a loss built by `loss_fn` with respect to
// `params`; gradient tensors mirror parameter shapes.
template <class T, class LossFn>
std::vector<Tensor<T>> compute_gradients(LossFn&& loss_fn, const std::vector<ad::Var<T>>& params) {
    ad::Var<T> loss = loss_fn();
    if (!loss->value.all_finite()) throw NumericError("compute_gradients: non-finite loss");
    for (const auto& p : params) {  // parameters off the loss path keep zero grads
        ad::ensure_grad(p.get());
        p->grad.zero();
    }
    ad::backward(loss);
    std::vector<Tensor<T>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(p->grad);
    return grads;
}

}  // namespace tstcc
