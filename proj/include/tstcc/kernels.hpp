#pragma once

#include "tstcc/parallel.hpp"
#include "tstcc/tensor.hpp"

#include <stdexcept>
#include <string>

// Hot inner loops. Each kernel has a serial reference version and an OpenMP
// version. The parallel versions split work across independent output
// elements only, so every output element sees the same accumulation order as
// the serial reference and results are bit-identical. The unsuffixed
// dispatchers pick a version from exec::mode().
//
// Raw-pointer cores let callers reinterpret leading dimensions (e.g. a
// (B,S,h) activation as (B*S,h) rows) without copying.

namespace tstcc::kern {

// ---- matmul family -------------------------------------------------------

// c(M,N) = a(M,K) * b(K,N)
template <class T>
void matmul_nn_serial(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T acc = 0;
            for (int64_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
            c[i * n + j] = acc;
        }
}

template <class T>
void matmul_nn_omp(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    exec::parallel_for(m, [&](int64_t i) {
        T* row = c + i * n;
        for (int64_t j = 0; j < n; ++j) row[j] = 0;
        // ikj order streams b row-major; per-output accumulation order is
        // still ascending in l, identical to the reference.
        for (int64_t l = 0; l < k; ++l) {
            const T av = a[i * k + l];
            const T* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    });
}

template <class T>
inline void matmul_nn_raw(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    if (exec::mode() == exec::Mode::parallel)
        matmul_nn_omp(a, b, c, m, k, n);
    else
        matmul_nn_serial(a, b, c, m, k, n);
}

// c(M,N) = a(M,K) * b(N,K)^T
template <class T>
void matmul_nt_serial(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T acc = 0;
            for (int64_t l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
            c[i * n + j] = acc;
        }
}

template <class T>
void matmul_nt_omp(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    exec::parallel_for(m, [&](int64_t i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = acc;
        }
    });
}

template <class T>
inline void matmul_nt_raw(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    if (exec::mode() == exec::Mode::parallel)
        matmul_nt_omp(a, b, c, m, k, n);
    else
        matmul_nt_serial(a, b, c, m, k, n);
}

// c(M,N) = a(K,M)^T * b(K,N)
template <class T>
void matmul_tn_serial(const T* a, const T* b, T* c, int64_t k, int64_t m, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            T acc = 0;
            for (int64_t l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
            c[i * n + j] = acc;
        }
}

template <class T>
void matmul_tn_omp(const T* a, const T* b, T* c, int64_t k, int64_t m, int64_t n) {
    exec::parallel_for(m, [&](int64_t i) {
        T* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] = 0;
        for (int64_t l = 0; l < k; ++l) {
            const T av = a[l * m + i];
            const T* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

template <class T>
inline void matmul_tn_raw(const T* a, const T* b, T* c, int64_t k, int64_t m, int64_t n) {
    if (exec::mode() == exec::Mode::parallel)
        matmul_tn_omp(a, b, c, k, m, n);
    else
        matmul_tn_serial(a, b, c, k, m, n);
}

// Tensor wrappers for the plain 2-D case.
template <class T>
Tensor<T> matmul_nn(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul_nn: bad shapes " + a.shape_str() + " x " + b.shape_str());
    Tensor<T> c({a.dim(0), b.dim(1)});
    matmul_nn_raw(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
    return c;
}

template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw std::invalid_argument("matmul_nt: bad shapes " + a.shape_str() + " x " + b.shape_str());
    Tensor<T> c({a.dim(0), b.dim(0)});
    matmul_nt_raw(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(0));
    return c;
}

template <class T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("matmul_tn: bad shapes " + a.shape_str() + " x " + b.shape_str());
    Tensor<T> c({a.dim(1), b.dim(1)});
    matmul_tn_raw(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
    return c;
}

// ---- batched matmul (group dimension folded into dim 0) ------------------

template <class T>
void bmm_nn_serial(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
    for (int64_t gi = 0; gi < g; ++gi)
        matmul_nn_serial(a + gi * m * k, b + gi * k * n, c + gi * m * n, m, k, n);
}

template <class T>
void bmm_nn_omp(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
    exec::parallel_for(g * m, [&](int64_t idx) {
        const int64_t gi = idx / m, i = idx % m;
        const T* arow = a + (gi * m + i) * k;
        const T* bg = b + gi * k * n;
        T* crow = c + (gi * m + i) * n;
        for (int64_t j = 0; j < n; ++j) crow[j] = 0;
        for (int64_t l = 0; l < k; ++l) {
            const T av = arow[l];
            const T* brow = bg + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

template <class T>
inline void bmm_nn_raw(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
    if (exec::mode() == exec::Mode::parallel)
        bmm_nn_omp(a, b, c, g, m, k, n);
    else
        bmm_nn_serial(a, b, c, g, m, k, n);
}

template <class T>
void bmm_nt_serial(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
    for (int64_t gi = 0; gi < g; ++gi)
        matmul_nt_serial(a + gi * m * k, b + gi * n * k, c + gi * m * n, m, k, n);
}

template <class T>
void bmm_nt_omp(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
    exec::parallel_for(g * m, [&](int64_t idx) {
        const int64_t gi = idx / m, i = idx % m;
        const T* arow = a + (gi * m + i) * k;
        const T* bg = b + gi * n * k;
        T* crow = c + (gi * m + i) * n;
        for (int64_t j = 0; j < n; ++j) {
            const T* brow = bg + j * k;
            T acc = 0;
            for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = acc;
        }
    });
}

template <class T>
inline void bmm_nt_raw(const T* a, const T* b, T* c, int64_t g, int64_t m, int64_t k, int64_t n) {
    if (exec::mode() == exec::Mode::parallel)
        bmm_nt_omp(a, b, c, g, m, k, n);
    else
        bmm_nt_serial(a, b, c, g, m, k, n);
}

template <class T>
void bmm_tn_serial(const T* a, const T* b, T* c, int64_t g, int64_t k, int64_t m, int64_t n) {
    for (int64_t gi = 0; gi < g; ++gi)
        matmul_tn_serial(a + gi * k * m, b + gi * k * n, c + gi * m * n, k, m, n);
}

template <class T>
void bmm_tn_omp(const T* a, const T* b, T* c, int64_t g, int64_t k, int64_t m, int64_t n) {
    exec::parallel_for(g * m, [&](int64_t idx) {
        const int64_t gi = idx / m, i = idx % m;
        const T* ag = a + gi * k * m;
        const T* bg = b + gi * k * n;
        T* crow = c + (gi * m + i) * n;
        for (int64_t j = 0; j < n; ++j) crow[j] = 0;
        for (int64_t l = 0; l < k; ++l) {
            const T av = ag[l * m + i];
            const T* brow = bg + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    });
}

template <class T>
inline void bmm_tn_raw(const T* a, const T* b, T* c, int64_t g, int64_t k, int64_t m, int64_t n) {
    if (exec::mode() == exec::Mode::parallel)
        bmm_tn_omp(a, b, c, g, k, m, n);
    else
        bmm_tn_serial(a, b, c, g, k, m, n);
}

// ---- 1-D convolution, stride 1, 'same' padding ---------------------------
// pad_left = (W-1)/2, pad_right = W-1-pad_left; output length equals input.

template <class T>
void conv1d_same_fwd_serial(const T* x, const T* w, const T* bias, T* y, int64_t batch,
                            int64_t ci, int64_t t, int64_t co, int64_t width) {
    const int64_t pad_left = (width - 1) / 2;
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t o = 0; o < co; ++o)
            for (int64_t j = 0; j < t; ++j) {
                T acc = bias ? bias[o] : T(0);
                for (int64_t c = 0; c < ci; ++c)
                    for (int64_t u = 0; u < width; ++u) {
                        const int64_t src = j + u - pad_left;
                        if (src >= 0 && src < t)
                            acc += x[(b * ci + c) * t + src] * w[(o * ci + c) * width + u];
                    }
                y[(b * co + o) * t + j] = acc;
            }
}

// Shifted-saxpy formulation: for each tap the contribution is a contiguous
// vectorizable update over the valid output range. Per output element the
// (channel, tap) accumulation order equals the reference, so results are
// bit-identical.
template <class T>
void conv1d_same_fwd_omp(const T* x, const T* w, const T* bias, T* y, int64_t batch, int64_t ci,
                         int64_t t, int64_t co, int64_t width) {
    const int64_t pad_left = (width - 1) / 2;
    exec::parallel_for(batch * co, [&](int64_t idx) {
        const int64_t b = idx / co, o = idx % co;
        const T bval = bias ? bias[o] : T(0);
        T* yrow = y + (b * co + o) * t;
        for (int64_t j = 0; j < t; ++j) yrow[j] = bval;
        for (int64_t c = 0; c < ci; ++c) {
            const T* xrow = x + (b * ci + c) * t;
            const T* wrow = w + (o * ci + c) * width;
            for (int64_t u = 0; u < width; ++u) {
                const T wv = wrow[u];
                const int64_t shift = u - pad_left;  // y[j] += w[u] * x[j + shift]
                const int64_t j0 = shift < 0 ? -shift : 0;
                const int64_t j1 = shift > 0 ? t - shift : t;
                const T* xs = xrow + shift;
                for (int64_t j = j0; j < j1; ++j) yrow[j] += wv * xs[j];
            }
        }
    });
}

template <class T>
void conv1d_same_bwd_input_serial(const T* dy, const T* w, T* dx, int64_t batch, int64_t ci,
                                  int64_t t, int64_t co, int64_t width) {
    const int64_t pad_left = (width - 1) / 2;
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t c = 0; c < ci; ++c)
            for (int64_t s = 0; s < t; ++s) {
                T acc = 0;
                for (int64_t o = 0; o < co; ++o)
                    for (int64_t u = 0; u < width; ++u) {
                        const int64_t j = s - u + pad_left;  // output that read x[s] at tap u
                        if (j >= 0 && j < t) acc += dy[(b * co + o) * t + j] * w[(o * ci + c) * width + u];
                    }
                dx[(b * ci + c) * t + s] += acc;
            }
}

// Accumulates each row into a zeroed scratch buffer first; dx gets a single
// +=, matching the reference's register accumulation bit for bit even when dx
// already holds gradient contributions.
template <class T>
void conv1d_same_bwd_input_omp(const T* dy, const T* w, T* dx, int64_t batch, int64_t ci,
                               int64_t t, int64_t co, int64_t width) {
    const int64_t pad_left = (width - 1) / 2;
    exec::parallel_for(batch * ci, [&](int64_t idx) {
        const int64_t b = idx / ci, c = idx % ci;
        std::vector<T> acc(static_cast<size_t>(t), T(0));
        for (int64_t o = 0; o < co; ++o) {
            const T* dyrow = dy + (b * co + o) * t;
            const T* wrow = w + (o * ci + c) * width;
            for (int64_t u = 0; u < width; ++u) {
                const T wv = wrow[u];
                const int64_t shift = pad_left - u;  // acc[s] += w[u] * dy[s + shift]
                const int64_t s0 = shift < 0 ? -shift : 0;
                const int64_t s1 = shift > 0 ? t - shift : t;
                const T* dys = dyrow + shift;
                for (int64_t s = s0; s < s1; ++s) acc[static_cast<size_t>(s)] += wv * dys[s];
            }
        }
        T* dxrow = dx + (b * ci + c) * t;
        for (int64_t s = 0; s < t; ++s) dxrow[s] += acc[static_cast<size_t>(s)];
    });
}

template <class T>
void conv1d_same_bwd_weight_serial(const T* dy, const T* x, T* dw, T* dbias, int64_t batch,
                                   int64_t ci, int64_t t, int64_t co, int64_t width) {
    const int64_t pad_left = (width - 1) / 2;
    for (int64_t o = 0; o < co; ++o) {
        for (int64_t c = 0; c < ci; ++c)
            for (int64_t u = 0; u < width; ++u) {
                T acc = 0;
                for (int64_t b = 0; b < batch; ++b)
                    for (int64_t j = 0; j < t; ++j) {
                        const int64_t src = j + u - pad_left;
                        if (src >= 0 && src < t)
                            acc += dy[(b * co + o) * t + j] * x[(b * ci + c) * t + src];
                    }
                dw[(o * ci + c) * width + u] += acc;
            }
        T acc = 0;
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t j = 0; j < t; ++j) acc += dy[(b * co + o) * t + j];
        dbias[o] += acc;
    }
}

template <class T>
void conv1d_same_bwd_weight_omp(const T* dy, const T* x, T* dw, T* dbias, int64_t batch,
                                int64_t ci, int64_t t, int64_t co, int64_t width) {
    const int64_t pad_left = (width - 1) / 2;
    exec::parallel_for(co, [&](int64_t o) {
        for (int64_t c = 0; c < ci; ++c)
            for (int64_t u = 0; u < width; ++u) {
                const int64_t shift = u - pad_left;  // pairs dy[j] with x[j + shift]
                const int64_t j0 = shift < 0 ? -shift : 0;
                const int64_t j1 = shift > 0 ? t - shift : t;
                T acc = 0;
                for (int64_t b = 0; b < batch; ++b) {
                    const T* dyrow = dy + (b * co + o) * t;
                    const T* xs = x + (b * ci + c) * t + shift;
                    for (int64_t j = j0; j < j1; ++j) acc += dyrow[j] * xs[j];
                }
                dw[(o * ci + c) * width + u] += acc;
            }
        T acc = 0;
        for (int64_t b = 0; b < batch; ++b) {
            const T* dyrow = dy + (b * co + o) * t;
            for (int64_t j = 0; j < t; ++j) acc += dyrow[j];
        }
        dbias[o] += acc;
    });
}

template <class T>
inline void conv1d_same_fwd_raw(const T* x, const T* w, const T* bias, T* y, int64_t batch,
                                int64_t ci, int64_t t, int64_t co, int64_t width) {
    if (exec::mode() == exec::Mode::parallel)
        conv1d_same_fwd_omp(x, w, bias, y, batch, ci, t, co, width);
    else
        conv1d_same_fwd_serial(x, w, bias, y, batch, ci, t, co, width);
}

template <class T>
inline void conv1d_same_bwd_input_raw(const T* dy, const T* w, T* dx, int64_t batch, int64_t ci,
                                      int64_t t, int64_t co, int64_t width) {
    if (exec::mode() == exec::Mode::parallel)
        conv1d_same_bwd_input_omp(dy, w, dx, batch, ci, t, co, width);
    else
        conv1d_same_bwd_input_serial(dy, w, dx, batch, ci, t, co, width);
}

template <class T>
inline void conv1d_same_bwd_weight_raw(const T* dy, const T* x, T* dw, T* dbias, int64_t batch,
                                       int64_t ci, int64_t t, int64_t co, int64_t width) {
    if (exec::mode() == exec::Mode::parallel)
        conv1d_same_bwd_weight_omp(dy, x, dw, dbias, batch, ci, t, co, width);
    else
        conv1d_same_bwd_weight_serial(dy, x, dw, dbias, batch, ci, t, co, width);
}

// Tensor-level convolution wrappers.
template <class T>
Tensor<T> conv1d_same(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    if (x.rank() != 3 || w.rank() != 3 || x.dim(1) != w.dim(1))
        throw std::invalid_argument("conv1d_same: bad shapes " + x.shape_str() + ", " + w.shape_str());
    Tensor<T> y({x.dim(0), w.dim(0), x.dim(2)});
    conv1d_same_fwd_raw(x.data(), w.data(), bias.numel() ? bias.data() : nullptr, y.data(),
                        x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2));
    return y;
}

}  // namespace tstcc::kern
