#pragma once

#include "tstcc/kernels.hpp"
#include "tstcc/rng.hpp"
#include "tstcc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

// Tape-based reverse-mode autodiff over Tensor<T>. A graph is built per
// training step from shared leaf nodes (parameters); intermediate nodes are
// freed when the step's Vars go out of scope. Backward closures capture raw
// node pointers, which stay valid because every node holds shared_ptrs to its
// parents.

namespace tstcc::ad {

using tstcc::Tensor;

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;  // leaf the optimizer updates
    bool needs_grad = false;     // on a path between loss and a parameter
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void()> backward_fn;
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
}

template <class T>
Var<T> parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->needs_grad = true;
    return n;
}

template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p && p->needs_grad) n->needs_grad = true;
    n->parents = std::move(parents);
    return n;
}

template <class T>
inline void ensure_grad(Node<T>* n) {
    if (!n->grad.same_shape(n->value)) n->grad = Tensor<T>(n->value.shape());
}

// Runs reverse-mode accumulation from a scalar root. Grad buffers of every
// reachable node are zeroed first, so leaf grads are per-backward, not
// accumulated across steps.
template <class T>
void backward(const Var<T>& root) {
    if (root->value.numel() != 1)
        throw std::invalid_argument("backward: root must be a scalar, got " + root->value.shape_str());
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p && p->needs_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node<T>* n : order) {
        ensure_grad(n);
        n->grad.zero();
    }
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

// ---- elementwise ----------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    auto n = make_op(std::move(out), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn]() {
            if (pa->needs_grad)
                for (int64_t i = 0; i < pn->grad.numel(); ++i) pa->grad[i] += pn->grad[i];
            if (pb->needs_grad)
                for (int64_t i = 0; i < pn->grad.numel(); ++i) pb->grad[i] += pn->grad[i];
        };
    }
    return n;
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("sub: shape mismatch");
    Tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    auto n = make_op(std::move(out), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn]() {
            if (pa->needs_grad)
                for (int64_t i = 0; i < pn->grad.numel(); ++i) pa->grad[i] += pn->grad[i];
            if (pb->needs_grad)
                for (int64_t i = 0; i < pn->grad.numel(); ++i) pb->grad[i] -= pn->grad[i];
        };
    }
    return n;
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("mul: shape mismatch");
    Tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    auto n = make_op(std::move(out), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn]() {
            if (pa->needs_grad)
                for (int64_t i = 0; i < pn->grad.numel(); ++i) pa->grad[i] += pn->grad[i] * pb->value[i];
            if (pb->needs_grad)
                for (int64_t i = 0; i < pn->grad.numel(); ++i) pb->grad[i] += pn->grad[i] * pa->value[i];
        };
    }
    return n;
}

template <class T>
Var<T> scale(const Var<T>& a, double s) {
    Tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(a->value[i] * s);
    auto n = make_op(std::move(out), {a});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pn = n.get();
        n->backward_fn = [pa, pn, s]() {
            for (int64_t i = 0; i < pn->grad.numel(); ++i)
                pa->grad[i] += static_cast<T>(pn->grad[i] * s);
        };
    }
    return n;
}

template <class T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > T(0) ? a->value[i] : T(0);
    auto n = make_op(std::move(out), {a});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pn = n.get();
        n->backward_fn = [pa, pn]() {
            for (int64_t i = 0; i < pn->grad.numel(); ++i)
                if (pa->value[i] > T(0)) pa->grad[i] += pn->grad[i];
        };
    }
    return n;
}

template <class T>
Var<T> sum_all(const Var<T>& a) {
    Tensor<T> out(std::vector<int64_t>{});
    double acc = 0;
    for (int64_t i = 0; i < a->value.numel(); ++i) acc += static_cast<double>(a->value[i]);
    out[0] = static_cast<T>(acc);
    auto n = make_op(std::move(out), {a});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pn = n.get();
        n->backward_fn = [pa, pn]() {
            const T g = pn->grad[0];
            for (int64_t i = 0; i < pa->grad.numel(); ++i) pa->grad[i] += g;
        };
    }
    return n;
}

// ---- affine layers ---------------------------------------------------------

// x (..., in) * w(out, in)^T + b(out); leading dims are preserved.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const int64_t in = w->value.dim(1), out_dim = w->value.dim(0);
    if (x->value.rank() < 2 || x->value.dim(x->value.rank() - 1) != in)
        throw std::invalid_argument("linear: input " + x->value.shape_str() + " vs weight " +
                                    w->value.shape_str());
    const int64_t rows = x->value.numel() / in;
    std::vector<int64_t> out_shape(x->value.shape());
    out_shape.back() = out_dim;
    Tensor<T> y(out_shape);
    kern::matmul_nt_raw(x->value.data(), w->value.data(), y.data(), rows, in, out_dim);
    if (b) {
        T* py = y.data();
        const T* pb = b->value.data();
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t o = 0; o < out_dim; ++o) py[r * out_dim + o] += pb[o];
    }
    auto n = make_op(std::move(y), b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pw = w.get(), *pn = n.get();
        Node<T>* pbn = b ? b.get() : nullptr;
        n->backward_fn = [px, pw, pbn, pn, rows, in, out_dim]() {
            const T* dy = pn->grad.data();
            if (px->needs_grad) {
                Tensor<T> dx({rows, in});
                kern::matmul_nn_raw(dy, pw->value.data(), dx.data(), rows, out_dim, in);
                for (int64_t i = 0; i < dx.numel(); ++i) px->grad[i] += dx[i];
            }
            if (pw->needs_grad) {
                Tensor<T> dw({out_dim, in});
                kern::matmul_tn_raw(dy, px->value.data(), dw.data(), rows, out_dim, in);
                for (int64_t i = 0; i < dw.numel(); ++i) pw->grad[i] += dw[i];
            }
            if (pbn && pbn->needs_grad) {
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t o = 0; o < out_dim; ++o) pbn->grad[o] += dy[r * out_dim + o];
            }
        };
    }
    return n;
}

// y(M,N) = a(M,K) * b(N,K)^T with both operands differentiable.
template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
    Tensor<T> y = kern::matmul_nt(a->value, b->value);
    auto n = make_op(std::move(y), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn]() {
            const int64_t m = pa->value.dim(0), k = pa->value.dim(1), nr = pb->value.dim(0);
            if (pa->needs_grad) {
                Tensor<T> da({m, k});
                kern::matmul_nn_raw(pn->grad.data(), pb->value.data(), da.data(), m, nr, k);
                for (int64_t i = 0; i < da.numel(); ++i) pa->grad[i] += da[i];
            }
            if (pb->needs_grad) {
                Tensor<T> db({nr, k});
                kern::matmul_tn_raw(pn->grad.data(), pa->value.data(), db.data(), m, nr, k);
                for (int64_t i = 0; i < db.numel(); ++i) pb->grad[i] += db[i];
            }
        };
    }
    return n;
}

// ---- batched matmul for attention -----------------------------------------

template <class T>
Var<T> bmm_nn(const Var<T>& a, const Var<T>& b) {
    const int64_t g = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2),
                  n2 = b->value.dim(2);
    if (b->value.dim(0) != g || b->value.dim(1) != k)
        throw std::invalid_argument("bmm_nn: shape mismatch");
    Tensor<T> y({g, m, n2});
    kern::bmm_nn_raw(a->value.data(), b->value.data(), y.data(), g, m, k, n2);
    auto n = make_op(std::move(y), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn, g, m, k, n2]() {
            if (pa->needs_grad) {
                Tensor<T> da({g, m, k});
                kern::bmm_nt_raw(pn->grad.data(), pb->value.data(), da.data(), g, m, n2, k);
                for (int64_t i = 0; i < da.numel(); ++i) pa->grad[i] += da[i];
            }
            if (pb->needs_grad) {
                Tensor<T> db({g, k, n2});
                kern::bmm_tn_raw(pa->value.data(), pn->grad.data(), db.data(), g, m, k, n2);
                for (int64_t i = 0; i < db.numel(); ++i) pb->grad[i] += db[i];
            }
        };
    }
    return n;
}

template <class T>
Var<T> bmm_nt(const Var<T>& a, const Var<T>& b) {
    const int64_t g = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2),
                  n2 = b->value.dim(1);
    if (b->value.dim(0) != g || b->value.dim(2) != k)
        throw std::invalid_argument("bmm_nt: shape mismatch");
    Tensor<T> y({g, m, n2});
    kern::bmm_nt_raw(a->value.data(), b->value.data(), y.data(), g, m, k, n2);
    auto n = make_op(std::move(y), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn, g, m, k, n2]() {
            if (pa->needs_grad) {
                Tensor<T> da({g, m, k});
                kern::bmm_nn_raw(pn->grad.data(), pb->value.data(), da.data(), g, m, n2, k);
                for (int64_t i = 0; i < da.numel(); ++i) pa->grad[i] += da[i];
            }
            if (pb->needs_grad) {
                // db(g,n2,k) = dy(g,m,n2)^T * a(g,m,k)
                Tensor<T> db({g, n2, k});
                kern::bmm_tn_raw(pn->grad.data(), pa->value.data(), db.data(), g, m, n2, k);
                for (int64_t i = 0; i < db.numel(); ++i) pb->grad[i] += db[i];
            }
        };
    }
    return n;
}

// ---- convolution / pooling / dropout / norms ------------------------------

template <class T>
Var<T> conv1d_same(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    Tensor<T> y = kern::conv1d_same(x->value, w->value, b ? b->value : Tensor<T>());
    auto n = make_op(std::move(y), b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pw = w.get(), *pn = n.get();
        Node<T>* pb = b ? b.get() : nullptr;
        n->backward_fn = [px, pw, pb, pn]() {
            const int64_t batch = px->value.dim(0), ci = px->value.dim(1), t = px->value.dim(2);
            const int64_t co = pw->value.dim(0), width = pw->value.dim(2);
            if (px->needs_grad)
                kern::conv1d_same_bwd_input_raw(pn->grad.data(), pw->value.data(), px->grad.data(),
                                                batch, ci, t, co, width);
            if (pw->needs_grad) {
                Tensor<T> dbias({co});
                kern::conv1d_same_bwd_weight_raw(pn->grad.data(), px->value.data(), pw->grad.data(),
                                                 dbias.data(), batch, ci, t, co, width);
                if (pb && pb->needs_grad)
                    for (int64_t o = 0; o < co; ++o) pb->grad[o] += dbias[o];
            }
        };
    }
    return n;
}

// Max pool, kernel 2, stride 2; odd tails are dropped. Ties keep the first.
template <class T>
Var<T> maxpool2(const Var<T>& x) {
    const int64_t batch = x->value.dim(0), c = x->value.dim(1), t = x->value.dim(2);
    const int64_t to = t / 2;
    if (to < 1) throw std::invalid_argument("maxpool2: time axis too short " + x->value.shape_str());
    Tensor<T> y({batch, c, to});
    auto arg = std::make_shared<std::vector<int8_t>>(static_cast<size_t>(batch * c * to));
    for (int64_t i = 0; i < batch * c; ++i) {
        const T* row = x->value.data() + i * t;
        T* yrow = y.data() + i * to;
        int8_t* amax = arg->data() + i * to;
        for (int64_t j = 0; j < to; ++j) {
            const T a = row[2 * j], bv = row[2 * j + 1];
            if (bv > a) {
                yrow[j] = bv;
                amax[j] = 1;
            } else {
                yrow[j] = a;
                amax[j] = 0;
            }
        }
    }
    auto n = make_op(std::move(y), {x});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pn = n.get();
        n->backward_fn = [px, pn, arg, batch, c, t, to]() {
            for (int64_t i = 0; i < batch * c; ++i) {
                T* dxr = px->grad.data() + i * t;
                const T* dyr = pn->grad.data() + i * to;
                const int8_t* amax = arg->data() + i * to;
                for (int64_t j = 0; j < to; ++j) dxr[2 * j + amax[j]] += dyr[j];
            }
        };
    }
    return n;
}

// Inverted dropout; identity when not training or p == 0.
template <class T>
Var<T> dropout(const Var<T>& x, double p, RngStream rng, bool training) {
    if (!training || p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    auto mask = std::make_shared<std::vector<int8_t>>(static_cast<size_t>(x->value.numel()));
    Tensor<T> y(x->value.shape());
    for (int64_t i = 0; i < y.numel(); ++i) {
        const bool keep = rng.uniform() >= p;
        (*mask)[static_cast<size_t>(i)] = keep;
        y[i] = keep ? x->value[i] * keep_scale : T(0);
    }
    auto n = make_op(std::move(y), {x});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pn = n.get();
        n->backward_fn = [px, pn, mask, keep_scale]() {
            for (int64_t i = 0; i < pn->grad.numel(); ++i)
                if ((*mask)[static_cast<size_t>(i)]) px->grad[i] += pn->grad[i] * keep_scale;
        };
    }
    return n;
}

// Batch norm over the (batch, time) axes of a (B,C,T) tensor. Training mode
// normalizes with batch statistics and updates the running buffers in place;
// eval mode normalizes with the running buffers.
template <class T>
Var<T> batchnorm1d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                   double momentum = 0.1, double eps = 1e-5) {
    const int64_t batch = x->value.dim(0), c = x->value.dim(1), t = x->value.dim(2);
    const int64_t n_red = batch * t;
    Tensor<T> y({batch, c, t});
    auto xhat = std::make_shared<Tensor<T>>(std::vector<int64_t>{batch, c, t});
    auto inv_std = std::make_shared<Tensor<T>>(std::vector<int64_t>{c});

    if (training) {
        for (int64_t ch = 0; ch < c; ++ch) {
            double mean = 0;
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t j = 0; j < t; ++j) mean += x->value.at3(b, ch, j);
            mean /= static_cast<double>(n_red);
            double var = 0;
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t j = 0; j < t; ++j) {
                    const double d = x->value.at3(b, ch, j) - mean;
                    var += d * d;
                }
            var /= static_cast<double>(n_red);
            const double istd = 1.0 / std::sqrt(var + eps);
            (*inv_std)[ch] = static_cast<T>(istd);
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t j = 0; j < t; ++j) {
                    const T xh = static_cast<T>((x->value.at3(b, ch, j) - mean) * istd);
                    xhat->at3(b, ch, j) = xh;
                    y.at3(b, ch, j) = gamma->value[ch] * xh + beta->value[ch];
                }
            const double unbiased = n_red > 1 ? var * n_red / (n_red - 1) : var;
            running_mean[ch] = static_cast<T>((1 - momentum) * running_mean[ch] + momentum * mean);
            running_var[ch] = static_cast<T>((1 - momentum) * running_var[ch] + momentum * unbiased);
        }
    } else {
        for (int64_t ch = 0; ch < c; ++ch) {
            const double istd = 1.0 / std::sqrt(static_cast<double>(running_var[ch]) + eps);
            (*inv_std)[ch] = static_cast<T>(istd);
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t j = 0; j < t; ++j) {
                    const T xh = static_cast<T>((x->value.at3(b, ch, j) - running_mean[ch]) * istd);
                    xhat->at3(b, ch, j) = xh;
                    y.at3(b, ch, j) = gamma->value[ch] * xh + beta->value[ch];
                }
        }
    }

    auto n = make_op(std::move(y), {x, gamma, beta});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pg = gamma.get(), *pb = beta.get(), *pn = n.get();
        n->backward_fn = [px, pg, pb, pn, xhat, inv_std, batch, c, t, n_red, training]() {
            for (int64_t ch = 0; ch < c; ++ch) {
                double sum_dy = 0, sum_dy_xhat = 0;
                for (int64_t b = 0; b < batch; ++b)
                    for (int64_t j = 0; j < t; ++j) {
                        const double dy = pn->grad.at3(b, ch, j);
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat->at3(b, ch, j);
                    }
                if (pg->needs_grad) pg->grad[ch] += static_cast<T>(sum_dy_xhat);
                if (pb->needs_grad) pb->grad[ch] += static_cast<T>(sum_dy);
                if (px->needs_grad) {
                    const double g = pg->value[ch], istd = (*inv_std)[ch];
                    if (training) {
                        const double inv_n = 1.0 / static_cast<double>(n_red);
                        for (int64_t b = 0; b < batch; ++b)
                            for (int64_t j = 0; j < t; ++j) {
                                const double dy = pn->grad.at3(b, ch, j);
                                const double xh = xhat->at3(b, ch, j);
                                px->grad.at3(b, ch, j) += static_cast<T>(
                                    g * istd * (dy - inv_n * sum_dy - xh * inv_n * sum_dy_xhat));
                            }
                    } else {
                        for (int64_t b = 0; b < batch; ++b)
                            for (int64_t j = 0; j < t; ++j)
                                px->grad.at3(b, ch, j) +=
                                    static_cast<T>(g * istd * pn->grad.at3(b, ch, j));
                    }
                }
            }
        };
    }
    return n;
}

// Layer norm over the last axis.
template <class T>
Var<T> layernorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-5) {
    const int64_t h = x->value.dim(x->value.rank() - 1);
    const int64_t rows = x->value.numel() / h;
    if (gamma->value.numel() != h || beta->value.numel() != h)
        throw std::invalid_argument("layernorm: affine params must have the feature width");
    Tensor<T> y(x->value.shape());
    auto xhat = std::make_shared<Tensor<T>>(x->value.shape());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const T* row = x->value.data() + r * h;
        double mean = 0;
        for (int64_t i = 0; i < h; ++i) mean += row[i];
        mean /= static_cast<double>(h);
        double var = 0;
        for (int64_t i = 0; i < h; ++i) {
            const double d = row[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(h);
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(r)] = istd;
        for (int64_t i = 0; i < h; ++i) {
            const T xh = static_cast<T>((row[i] - mean) * istd);
            xhat->data()[r * h + i] = xh;
            y.data()[r * h + i] = gamma->value[i] * xh + beta->value[i];
        }
    }
    auto n = make_op(std::move(y), {x, gamma, beta});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pg = gamma.get(), *pb = beta.get(), *pn = n.get();
        n->backward_fn = [px, pg, pb, pn, xhat, inv_std, rows, h]() {
            for (int64_t r = 0; r < rows; ++r) {
                const T* dy = pn->grad.data() + r * h;
                const T* xh = xhat->data() + r * h;
                double sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (int64_t i = 0; i < h; ++i) {
                    const double dxh = dy[i] * pg->value[i];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh[i];
                }
                if (pg->needs_grad)
                    for (int64_t i = 0; i < h; ++i) pg->grad[i] += dy[i] * xh[i];
                if (pb->needs_grad)
                    for (int64_t i = 0; i < h; ++i) pb->grad[i] += dy[i];
                if (px->needs_grad) {
                    const double istd = (*inv_std)[static_cast<size_t>(r)];
                    const double inv_h = 1.0 / static_cast<double>(h);
                    for (int64_t i = 0; i < h; ++i) {
                        const double dxh = dy[i] * pg->value[i];
                        px->grad.data()[r * h + i] += static_cast<T>(
                            istd * (dxh - inv_h * sum_dxhat - xh[i] * inv_h * sum_dxhat_xhat));
                    }
                }
            }
        };
    }
    return n;
}

// Softmax over the last axis, max-subtracted.
template <class T>
Var<T> softmax_lastdim(const Var<T>& x) {
    const int64_t h = x->value.dim(x->value.rank() - 1);
    const int64_t rows = x->value.numel() / h;
    Tensor<T> y(x->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
        const T* row = x->value.data() + r * h;
        T* yr = y.data() + r * h;
        T mx = row[0];
        for (int64_t i = 1; i < h; ++i) mx = std::max(mx, row[i]);
        double denom = 0;
        for (int64_t i = 0; i < h; ++i) {
            const double e = std::exp(static_cast<double>(row[i] - mx));
            yr[i] = static_cast<T>(e);
            denom += e;
        }
        for (int64_t i = 0; i < h; ++i) yr[i] = static_cast<T>(yr[i] / denom);
    }
    auto n = make_op(std::move(y), {x});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pn = n.get();
        n->backward_fn = [px, pn, rows, h]() {
            for (int64_t r = 0; r < rows; ++r) {
                const T* yr = pn->value.data() + r * h;
                const T* dy = pn->grad.data() + r * h;
                double dot = 0;
                for (int64_t i = 0; i < h; ++i) dot += static_cast<double>(dy[i]) * yr[i];
                for (int64_t i = 0; i < h; ++i)
                    px->grad.data()[r * h + i] += static_cast<T>(yr[i] * (dy[i] - dot));
            }
        };
    }
    return n;
}

// ---- data movement ---------------------------------------------------------

namespace detail {

// Generic gather: out[i] = in[index(i)]; backward scatters grads back.
template <class T, class IndexFn>
Var<T> gather_op(const Var<T>& x, std::vector<int64_t> out_shape, IndexFn&& index) {
    Tensor<T> y(std::move(out_shape));
    auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(y.numel()));
    for (int64_t i = 0; i < y.numel(); ++i) {
        const int64_t src = index(i);
        (*idx)[static_cast<size_t>(i)] = src;
        y[i] = x->value[src];
    }
    auto n = make_op(std::move(y), {x});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pn = n.get();
        n->backward_fn = [px, pn, idx]() {
            for (int64_t i = 0; i < pn->grad.numel(); ++i)
                px->grad[(*idx)[static_cast<size_t>(i)]] += pn->grad[i];
        };
    }
    return n;
}

}  // namespace detail

// x(B,C,T) -> first `t` timesteps (B,C,t).
template <class T>
Var<T> time_prefix(const Var<T>& x, int64_t t) {
    const int64_t b = x->value.dim(0), c = x->value.dim(1), tt = x->value.dim(2);
    if (t < 1 || t > tt) throw std::invalid_argument("time_prefix: bad length");
    return detail::gather_op(x, {b, c, t}, [c, t, tt](int64_t i) {
        const int64_t j = i % t, rest = i / t, ch = rest % c, bi = rest / c;
        return (bi * c + ch) * tt + j;
    });
}

// x(B,C,T) -> timestep `idx` as (B,C).
template <class T>
Var<T> time_step(const Var<T>& x, int64_t idx) {
    const int64_t b = x->value.dim(0), c = x->value.dim(1), tt = x->value.dim(2);
    if (idx < 0 || idx >= tt) throw std::invalid_argument("time_step: index out of range");
    return detail::gather_op(x, {b, c}, [c, tt, idx](int64_t i) {
        const int64_t ch = i % c, bi = i / c;
        return (bi * c + ch) * tt + idx;
    });
}

// (B,C,T) -> (B,T,C)
template <class T>
Var<T> bct_to_btc(const Var<T>& x) {
    const int64_t b = x->value.dim(0), c = x->value.dim(1), t = x->value.dim(2);
    return detail::gather_op(x, {b, t, c}, [c, t](int64_t i) {
        const int64_t ch = i % c, rest = i / c, j = rest % t, bi = rest / t;
        return (bi * c + ch) * t + j;
    });
}

// (B,C,T) -> (B, C*T), row-major flatten.
template <class T>
Var<T> flatten2(const Var<T>& x) {
    const int64_t b = x->value.dim(0);
    const int64_t f = x->value.numel() / b;
    return detail::gather_op(x, {b, f}, [](int64_t i) { return i; });
}

// (B,S,h) -> (B*H, S, h/H): heads become groups for batched matmul.
template <class T>
Var<T> split_heads(const Var<T>& x, int64_t heads) {
    const int64_t b = x->value.dim(0), s = x->value.dim(1), h = x->value.dim(2);
    if (h % heads != 0) throw std::invalid_argument("split_heads: width not divisible by heads");
    const int64_t dh = h / heads;
    return detail::gather_op(x, {b * heads, s, dh}, [s, h, dh, heads](int64_t i) {
        const int64_t d = i % dh, rest = i / dh, si = rest % s, g = rest / s;
        const int64_t bi = g / heads, hd = g % heads;
        return (bi * s + si) * h + hd * dh + d;
    });
}

// (B*H, S, h/H) -> (B,S,h)
template <class T>
Var<T> merge_heads(const Var<T>& x, int64_t heads) {
    const int64_t g = x->value.dim(0), s = x->value.dim(1), dh = x->value.dim(2);
    const int64_t b = g / heads, h = heads * dh;
    return detail::gather_op(x, {b, s, h}, [s, h, dh, heads](int64_t i) {
        const int64_t f = i % h, rest = i / h, si = rest % s, bi = rest / s;
        const int64_t hd = f / dh, d = f % dh;
        return ((bi * heads + hd) * s + si) * dh + d;
    });
}

// (B,S,h) -> row 0 of each sequence: (B,h)
template <class T>
Var<T> row0(const Var<T>& x) {
    const int64_t b = x->value.dim(0), s = x->value.dim(1), h = x->value.dim(2);
    (void)s;
    return detail::gather_op(x, {b, h},
                             [s, h](int64_t i) { return (i / h) * s * h + (i % h); });
}

// Rows of a and b interleaved: out rows (2i, 2i+1) = (a_i, b_i).
template <class T>
Var<T> interleave_rows(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value) || a->value.rank() != 2)
        throw std::invalid_argument("interleave_rows: need equal 2-d shapes");
    const int64_t m = a->value.dim(0), w = a->value.dim(1);
    Tensor<T> y({2 * m, w});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j) {
            y.at2(2 * i, j) = a->value.at2(i, j);
            y.at2(2 * i + 1, j) = b->value.at2(i, j);
        }
    auto n = make_op(std::move(y), {a, b});
    if (n->needs_grad) {
        Node<T>*pa = a.get(), *pb = b.get(), *pn = n.get();
        n->backward_fn = [pa, pb, pn, m, w]() {
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    if (pa->needs_grad) pa->grad.at2(i, j) += pn->grad.at2(2 * i, j);
                    if (pb->needs_grad) pb->grad.at2(i, j) += pn->grad.at2(2 * i + 1, j);
                }
        };
    }
    return n;
}

// Prepends a learned token to every sequence: (h), (B,S,h) -> (B,S+1,h).
template <class T>
Var<T> prepend_token(const Var<T>& token, const Var<T>& x) {
    const int64_t b = x->value.dim(0), s = x->value.dim(1), h = x->value.dim(2);
    if (token->value.numel() != h) throw std::invalid_argument("prepend_token: width mismatch");
    Tensor<T> y({b, s + 1, h});
    for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t i = 0; i < h; ++i) y.at3(bi, 0, i) = token->value[i];
        for (int64_t si = 0; si < s; ++si)
            for (int64_t i = 0; i < h; ++i) y.at3(bi, si + 1, i) = x->value.at3(bi, si, i);
    }
    auto n = make_op(std::move(y), {token, x});
    if (n->needs_grad) {
        Node<T>*pt = token.get(), *px = x.get(), *pn = n.get();
        n->backward_fn = [pt, px, pn, b, s, h]() {
            if (pt->needs_grad)
                for (int64_t bi = 0; bi < b; ++bi)
                    for (int64_t i = 0; i < h; ++i) pt->grad[i] += pn->grad.at3(bi, 0, i);
            if (px->needs_grad)
                for (int64_t bi = 0; bi < b; ++bi)
                    for (int64_t si = 0; si < s; ++si)
                        for (int64_t i = 0; i < h; ++i)
                            px->grad.at3(bi, si, i) += pn->grad.at3(bi, si + 1, i);
        };
    }
    return n;
}

// ---- normalization / losses -------------------------------------------------

// L2-normalizes each row; all-zero rows stay zero (and receive zero gradient).
template <class T>
Var<T> l2_normalize_rows(const Var<T>& x) {
    const int64_t m = x->value.dim(0), w = x->value.dim(1);
    Tensor<T> y({m, w});
    auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) {
        double ss = 0;
        for (int64_t j = 0; j < w; ++j) ss += static_cast<double>(x->value.at2(i, j)) * x->value.at2(i, j);
        const double nrm = std::sqrt(ss);
        (*norms)[static_cast<size_t>(i)] = nrm;
        if (nrm > 0)
            for (int64_t j = 0; j < w; ++j) y.at2(i, j) = static_cast<T>(x->value.at2(i, j) / nrm);
    }
    auto n = make_op(std::move(y), {x});
    if (n->needs_grad) {
        Node<T>*px = x.get(), *pn = n.get();
        n->backward_fn = [px, pn, norms, m, w]() {
            for (int64_t i = 0; i < m; ++i) {
                const double nrm = (*norms)[static_cast<size_t>(i)];
                if (nrm <= 0) continue;
                double dot = 0;
                for (int64_t j = 0; j < w; ++j)
                    dot += static_cast<double>(pn->grad.at2(i, j)) * pn->value.at2(i, j);
                for (int64_t j = 0; j < w; ++j)
                    px->grad.at2(i, j) +=
                        static_cast<T>((pn->grad.at2(i, j) - pn->value.at2(i, j) * dot) / nrm);
            }
        };
    }
    return n;
}

// Mean over rows of (logsumexp(row) - row[target]); the standard stabilized
// cross entropy from logits.
template <class T>
Var<T> cross_entropy_rows(const Var<T>& logits, const std::vector<int64_t>& targets) {
    const int64_t m = logits->value.dim(0), w = logits->value.dim(1);
    if (static_cast<int64_t>(targets.size()) != m)
        throw std::invalid_argument("cross_entropy_rows: target count mismatch");
    auto probs = std::make_shared<Tensor<T>>(std::vector<int64_t>{m, w});
    double total = 0;
    for (int64_t i = 0; i < m; ++i) {
        if (targets[static_cast<size_t>(i)] < 0 || targets[static_cast<size_t>(i)] >= w)
            throw std::out_of_range("cross_entropy_rows: label out of range");
        const T* row = logits->value.data() + i * w;
        T mx = row[0];
        for (int64_t j = 1; j < w; ++j) mx = std::max(mx, row[j]);
        double denom = 0;
        for (int64_t j = 0; j < w; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        for (int64_t j = 0; j < w; ++j)
            probs->at2(i, j) = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / denom);
        total += std::log(denom) - static_cast<double>(row[targets[static_cast<size_t>(i)]] - mx);
    }
    Tensor<T> out(std::vector<int64_t>{});
    out[0] = static_cast<T>(total / static_cast<double>(m));
    auto n = make_op(std::move(out), {logits});
    if (n->needs_grad) {
        Node<T>*pl = logits.get(), *pn = n.get();
        auto tgt = std::make_shared<std::vector<int64_t>>(targets);
        n->backward_fn = [pl, pn, probs, tgt, m, w]() {
            const T g = pn->grad[0];
            const T inv_m = static_cast<T>(1.0 / static_cast<double>(m));
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    T d = probs->at2(i, j);
                    if (j == (*tgt)[static_cast<size_t>(i)]) d -= T(1);
                    pl->grad.at2(i, j) += g * inv_m * d;
                }
        };
    }
    return n;
}

// NT-Xent on a (2N,2N) cosine-similarity matrix whose rows are view pairs
// (2k, 2k+1). l(i,j) = logsumexp_{m != i}(sim[i]/tau) - sim[i][j]/tau,
// averaged over all 2N ordered pairs.
template <class T>
Var<T> nt_xent_from_sim(const Var<T>& sim, double tau) {
    if (tau <= 0) throw std::invalid_argument("nt_xent: temperature must be positive");
    const int64_t m = sim->value.dim(0);
    if (sim->value.dim(1) != m || m % 2 != 0)
        throw std::invalid_argument("nt_xent: need even square similarity matrix");
    auto soft = std::make_shared<Tensor<T>>(std::vector<int64_t>{m, m});  // masked softmax rows
    double total = 0;
    for (int64_t i = 0; i < m; ++i) {
        const int64_t j = i ^ 1;
        double mx = -1e300;
        for (int64_t k = 0; k < m; ++k)
            if (k != i) mx = std::max(mx, static_cast<double>(sim->value.at2(i, k)) / tau);
        double denom = 0;
        for (int64_t k = 0; k < m; ++k) {
            if (k == i) {
                soft->at2(i, k) = T(0);
                continue;
            }
            const double e = std::exp(static_cast<double>(sim->value.at2(i, k)) / tau - mx);
            soft->at2(i, k) = static_cast<T>(e);
            denom += e;
        }
        for (int64_t k = 0; k < m; ++k)
            if (k != i) soft->at2(i, k) = static_cast<T>(soft->at2(i, k) / denom);
        total += std::log(denom) + mx - static_cast<double>(sim->value.at2(i, j)) / tau;
    }
    Tensor<T> out(std::vector<int64_t>{});
    out[0] = static_cast<T>(total / static_cast<double>(m));
    auto n = make_op(std::move(out), {sim});
    if (n->needs_grad) {
        Node<T>*ps = sim.get(), *pn = n.get();
        n->backward_fn = [ps, pn, soft, m, tau]() {
            const double coef = static_cast<double>(pn->grad[0]) / (static_cast<double>(m) * tau);
            for (int64_t i = 0; i < m; ++i) {
                const int64_t j = i ^ 1;
                for (int64_t k = 0; k < m; ++k) {
                    if (k == i) continue;
                    double d = soft->at2(i, k);
                    if (k == j) d -= 1.0;
                    ps->grad.at2(i, k) += static_cast<T>(coef * d);
                }
            }
        };
    }
    return n;
}

// Supervised contrastive loss on a (2N,2N) similarity matrix: positives of
// anchor i are all other rows with the same label. Anchors without positives
// contribute zero; if nobody has a positive this throws. mean_over_anchors
// divides the sum by 2N.
template <class T>
Var<T> supcon_from_sim(const Var<T>& sim, const std::vector<int64_t>& labels, double tau,
                       bool mean_over_anchors) {
    if (tau <= 0) throw std::invalid_argument("supcon: temperature must be positive");
    const int64_t m = sim->value.dim(0);
    if (sim->value.dim(1) != m || static_cast<int64_t>(labels.size()) != m)
        throw std::invalid_argument("supcon: shape/label mismatch");
    auto soft = std::make_shared<Tensor<T>>(std::vector<int64_t>{m, m});
    auto pos_count = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(m), 0);
    bool any_positive = false;
    double total = 0;
    for (int64_t i = 0; i < m; ++i) {
        int64_t np = 0;
        for (int64_t k = 0; k < m; ++k)
            if (k != i && labels[static_cast<size_t>(k)] == labels[static_cast<size_t>(i)]) ++np;
        (*pos_count)[static_cast<size_t>(i)] = np;
        if (np == 0) continue;
        any_positive = true;
        double mx = -1e300;
        for (int64_t k = 0; k < m; ++k)
            if (k != i) mx = std::max(mx, static_cast<double>(sim->value.at2(i, k)) / tau);
        double denom = 0;
        for (int64_t k = 0; k < m; ++k) {
            if (k == i) {
                soft->at2(i, k) = T(0);
                continue;
            }
            const double e = std::exp(static_cast<double>(sim->value.at2(i, k)) / tau - mx);
            soft->at2(i, k) = static_cast<T>(e);
            denom += e;
        }
        for (int64_t k = 0; k < m; ++k)
            if (k != i) soft->at2(i, k) = static_cast<T>(soft->at2(i, k) / denom);
        const double lse = std::log(denom) + mx;
        double anchor = 0;
        for (int64_t k = 0; k < m; ++k)
            if (k != i && labels[static_cast<size_t>(k)] == labels[static_cast<size_t>(i)])
                anchor += lse - static_cast<double>(sim->value.at2(i, k)) / tau;
        total += anchor / static_cast<double>(np);
    }
    if (!any_positive) throw std::invalid_argument("supcon: no positive pairs in batch");
    const double norm = mean_over_anchors ? 1.0 / static_cast<double>(m) : 1.0;
    Tensor<T> out(std::vector<int64_t>{});
    out[0] = static_cast<T>(total * norm);
    auto n = make_op(std::move(out), {sim});
    if (n->needs_grad) {
        Node<T>*ps = sim.get(), *pn = n.get();
        auto labs = std::make_shared<std::vector<int64_t>>(labels);
        n->backward_fn = [ps, pn, soft, pos_count, labs, m, tau, norm]() {
            const double coef = static_cast<double>(pn->grad[0]) * norm / tau;
            for (int64_t i = 0; i < m; ++i) {
                const int64_t np = (*pos_count)[static_cast<size_t>(i)];
                if (np == 0) continue;
                const double inv_np = 1.0 / static_cast<double>(np);
                for (int64_t k = 0; k < m; ++k) {
                    if (k == i) continue;
                    double d = soft->at2(i, k);  // summed |P(i)| times, each * 1/|P(i)|
                    if ((*labs)[static_cast<size_t>(k)] == (*labs)[static_cast<size_t>(i)])
                        d -= inv_np;
                    ps->grad.at2(i, k) += static_cast<T>(coef * d);
                }
            }
        };
    }
    return n;
}

}  // namespace tstcc::ad
