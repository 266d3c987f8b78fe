#pragma once

#include "tstcc/autodiff.hpp"
#include "tstcc/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace tstcc {

struct AdamHyper {
    double lr = 3e-4;
    double weight_decay = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

// Adam with decoupled weight decay: decay is applied to the parameter
// directly, then the bias-corrected moment update follows.
template <class T>
class Adam {
public:
    Adam(std::vector<ad::Var<T>> params, AdamHyper hyper = {})
        : params_(std::move(params)), hyper_(hyper) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    // Consumes the gradients currently stored on the parameters.
    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_count_));
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = params_[pi]->value;
            const auto& g = params_[pi]->grad;
            auto& m = m_[pi];
            auto& v = v_[pi];
            const bool has_grad = g.same_shape(p);
            for (int64_t i = 0; i < p.numel(); ++i) {
                const double gi = has_grad ? static_cast<double>(g[i]) : 0.0;
                if (hyper_.weight_decay != 0)
                    p[i] = static_cast<T>(p[i] - hyper_.lr * hyper_.weight_decay * p[i]);
                m[i] = static_cast<T>(hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * gi);
                v[i] = static_cast<T>(hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * gi * gi);
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] = static_cast<T>(p[i] - hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps));
            }
        }
    }

    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t t) { step_count_ = t; }
    const AdamHyper& hyper() const { return hyper_; }

    size_t size() const { return params_.size(); }
    Tensor<T>& moment1(size_t i) { return m_[i]; }
    Tensor<T>& moment2(size_t i) { return v_[i]; }

private:
    std::vector<ad::Var<T>> params_;
    std::vector<Tensor<T>> m_, v_;
    AdamHyper hyper_;
    int64_t step_count_ = 0;
};

}  // namespace tstcc
