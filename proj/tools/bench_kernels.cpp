// Compares the serial reference kernels against the OpenMP versions, plus one
// end-to-end contrastive training step in both execution modes.

#include "tstcc/adam.hpp"
#include "tstcc/augment.hpp"
#include "tstcc/config.hpp"
#include "tstcc/kernels.hpp"
#include "tstcc/losses.hpp"
#include "tstcc/model.hpp"
#include "tstcc/parallel.hpp"
#include "tstcc/rng.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace tstcc;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

Tensor<float> random_tensor(std::vector<int64_t> shape, RngStream& rng) {
    Tensor<float> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal());
    return t;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f %10.3f %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

void bench_train_step(exec::Mode mode, double* out_ms) {
    exec::set_mode(mode);
    RunConfig cfg;
    cfg.hidden_dim = 64;
    cfg.layers = 2;
    cfg.feature_dim = 32;
    Dataset data = make_synthetic(43, 1, 128, 3, 0.3, 7);
    const ModelConfig mc = cfg.model_config(1, 128, 3);
    Model<float> model = Model<float>::init(mc, RngStream(1));
    auto params = model.pretrain_params();
    Adam<float> adam(params);

    *out_ms = time_ms(
        [&]() {
            RngStream rng(3);
            BatchIterator it(data, 128, 5, false);
            Batch b;
            it.next(b);
            ViewPair vp = make_view_pair(b, cfg.augment, rng.split(0));
            auto z_w = model.encoder_forward(vp.weak.x, true, rng.split(1));
            auto z_s = model.encoder_forward(vp.strong.x, true, rng.split(2));
            const int64_t t = 4, K = mc.horizon();
            TemporalBatchViews<float> v;
            v.z_weak = z_w;
            v.z_strong = z_s;
            v.c_weak = model.transformer_context(ad::time_prefix(z_w, t), true, rng.split(3));
            v.c_strong = model.transformer_context(ad::time_prefix(z_s, t), true, rng.split(4));
            v.anchor = t;
            v.horizon = K;
            auto l_s = temporal_contrast_loss(v, model.predictors, Direction::strong_to_weak);
            auto l_w = temporal_contrast_loss(v, model.predictors, Direction::weak_to_strong);
            auto proj = ad::interleave_rows(model.projection_head_forward(v.c_weak),
                                            model.projection_head_forward(v.c_strong));
            auto l_cc = contextual_contrast_loss(proj, cfg.weights.tau);
            auto total = combine_unsup(l_s, l_w, l_cc, cfg.weights);
            ad::backward(total);
            adam.step();
        },
        3);
}

}  // namespace

int main() {
    RngStream rng(42);

#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel mode falls back to serial\n\n");
#endif
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial/ms", "omp/ms", "speedup");

    {
        auto a = random_tensor({256, 256}, rng);
        auto b = random_tensor({256, 256}, rng);
        Tensor<float> c({256, 256});
        const double s = time_ms(
            [&]() { kern::matmul_nn_serial(a.data(), b.data(), c.data(), 256, 256, 256); }, 10);
        const double p = time_ms(
            [&]() {
                exec::set_mode(exec::Mode::parallel);
                kern::matmul_nn_omp(a.data(), b.data(), c.data(), 256, 256, 256);
            },
            10);
        row("matmul_nn 256^3", s, p);
    }
    {
        auto x = random_tensor({128, 32, 128}, rng);
        auto w = random_tensor({64, 32, 8}, rng);
        auto bias = random_tensor({64}, rng);
        Tensor<float> y({128, 64, 128});
        const double s = time_ms(
            [&]() {
                kern::conv1d_same_fwd_serial(x.data(), w.data(), bias.data(), y.data(), 128, 32,
                                             128, 64, 8);
            },
            5);
        const double p = time_ms(
            [&]() {
                exec::set_mode(exec::Mode::parallel);
                kern::conv1d_same_fwd_omp(x.data(), w.data(), bias.data(), y.data(), 128, 32, 128,
                                          64, 8);
            },
            5);
        row("conv1d 128x32x128 -> 64", s, p);
    }
    {
        auto a = random_tensor({512, 17, 16}, rng);
        auto b = random_tensor({512, 17, 16}, rng);
        Tensor<float> c({512, 17, 17});
        const double s = time_ms(
            [&]() { kern::bmm_nt_serial(a.data(), b.data(), c.data(), 512, 17, 16, 17); }, 20);
        const double p = time_ms(
            [&]() {
                exec::set_mode(exec::Mode::parallel);
                kern::bmm_nt_omp(a.data(), b.data(), c.data(), 512, 17, 16, 17);
            },
            20);
        row("bmm_nt attention scores", s, p);
    }
    {
        double s = 0, p = 0;
        bench_train_step(exec::Mode::serial, &s);
        bench_train_step(exec::Mode::parallel, &p);
        row("full contrastive step", s, p);
    }
    exec::set_mode(exec::Mode::parallel);
    return 0;
}
