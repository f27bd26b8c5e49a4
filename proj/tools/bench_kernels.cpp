// SPDX-License-Identifier: Apache-2.0
//
// Side-by-side timing of the serial reference kernels and the parallel
// im2col/GEMM kernels on translator-sized workloads, with a max-difference
// column as a quick parity check. Usage: bench_kernels [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "cfx/nn/kernels.hpp"
#include "cfx/rng.hpp"

using cfx::Rng;
using cfx::nn::ConvGeom;
using cfx::nn::Tensor;

namespace {

void fill(std::vector<float> &v, Rng &rng) {
    for (auto &x : v)
        x = float(rng.uniform(-1.0, 1.0));
}

void fill(Tensor<float> &t, Rng &rng) { fill(t.v, rng); }

template <typename F> double best_ms(int reps, F &&fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

double max_diff(const std::vector<float> &a, const std::vector<float> &b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, double(std::abs(a[i] - b[i])));
    return m;
}

void report(const char *name, double ref_ms, double fast_ms, double diff) {
    std::printf("%-28s %10.3f %10.3f %9.2fx %12.3e\n", name, ref_ms, fast_ms, ref_ms / fast_ms,
                diff);
}

struct ConvCase {
    const char *name;
    int batch, cin, cout, h, w;
    ConvGeom geom;
};

void bench_conv(const ConvCase &cs, int reps, Rng &rng) {
    namespace ref = cfx::nn::ref;
    namespace fast = cfx::nn::fast;
    Tensor<float> x(cs.batch, cs.cin, cs.h, cs.w);
    std::vector<float> w(size_t(cs.cout) * cs.cin * cs.geom.kernel * cs.geom.kernel);
    std::vector<float> b(size_t(cs.cout));
    fill(x, rng);
    fill(w, rng);
    fill(b, rng);
    const int oh = cfx::nn::conv_out_dim(cs.h, cs.geom);
    const int ow = cfx::nn::conv_out_dim(cs.w, cs.geom);
    Tensor<float> y_ref(cs.batch, cs.cout, oh, ow), y_fast = y_ref;
    const double t_ref = best_ms(reps, [&] { ref::conv2d_forward(x, w, b, cs.geom, y_ref); });
    const double t_fast = best_ms(reps, [&] { fast::conv2d_forward(x, w, b, cs.geom, y_fast); });
    report((std::string(cs.name) + " fwd").c_str(), t_ref, t_fast, max_diff(y_ref.v, y_fast.v));

    Tensor<float> dy(cs.batch, cs.cout, oh, ow);
    fill(dy, rng);
    Tensor<float> dx_ref(cs.batch, cs.cin, cs.h, cs.w), dx_fast = dx_ref;
    const double d_ref = best_ms(reps, [&] { ref::conv2d_backward_data(dy, w, cs.geom, dx_ref); });
    const double d_fast =
        best_ms(reps, [&] { fast::conv2d_backward_data(dy, w, cs.geom, dx_fast); });
    report((std::string(cs.name) + " bwd-data").c_str(), d_ref, d_fast,
           max_diff(dx_ref.v, dx_fast.v));

    std::vector<float> dw_ref(w.size()), dw_fast(w.size());
    std::vector<float> db_ref(b.size()), db_fast(b.size());
    const double f_ref = best_ms(reps, [&] {
        std::fill(dw_ref.begin(), dw_ref.end(), 0.0f);
        std::fill(db_ref.begin(), db_ref.end(), 0.0f);
        ref::conv2d_backward_filter(x, dy, cs.geom, dw_ref, db_ref);
    });
    const double f_fast = best_ms(reps, [&] {
        std::fill(dw_fast.begin(), dw_fast.end(), 0.0f);
        std::fill(db_fast.begin(), db_fast.end(), 0.0f);
        fast::conv2d_backward_filter(x, dy, cs.geom, dw_fast, db_fast);
    });
    report((std::string(cs.name) + " bwd-filter").c_str(), f_ref, f_fast,
           max_diff(dw_ref, dw_fast));
}

void bench_tconv(const ConvCase &cs, int reps, Rng &rng) {
    namespace ref = cfx::nn::ref;
    namespace fast = cfx::nn::fast;
    Tensor<float> x(cs.batch, cs.cin, cs.h, cs.w);
    std::vector<float> w(size_t(cs.cin) * cs.cout * cs.geom.kernel * cs.geom.kernel);
    std::vector<float> b(size_t(cs.cout));
    fill(x, rng);
    fill(w, rng);
    fill(b, rng);
    const int oh = cfx::nn::tconv_out_dim(cs.h, cs.geom);
    const int ow = cfx::nn::tconv_out_dim(cs.w, cs.geom);
    Tensor<float> y_ref(cs.batch, cs.cout, oh, ow), y_fast = y_ref;
    const double t_ref = best_ms(reps, [&] { ref::tconv2d_forward(x, w, b, cs.geom, y_ref); });
    const double t_fast = best_ms(reps, [&] { fast::tconv2d_forward(x, w, b, cs.geom, y_fast); });
    report((std::string(cs.name) + " fwd").c_str(), t_ref, t_fast, max_diff(y_ref.v, y_fast.v));
}

void bench_group_norm(int reps, Rng &rng) {
    namespace ref = cfx::nn::ref;
    namespace fast = cfx::nn::fast;
    const int n = 8, c = 128, h = 16, w = 16, groups = 8;
    Tensor<float> x(n, c, h, w), y_ref(n, c, h, w), y_fast(n, c, h, w);
    Tensor<float> xhat(n, c, h, w), rstd(n, groups, 1, 1);
    std::vector<float> gamma(groups, 1.0f), beta(groups, 0.0f);
    fill(x, rng);
    const double t_ref = best_ms(
        reps, [&] { ref::group_norm_forward(x, gamma, beta, groups, 1e-5f, y_ref, &xhat, &rstd); });
    const double t_fast = best_ms(reps, [&] {
        fast::group_norm_forward(x, gamma, beta, groups, 1e-5f, y_fast, &xhat, &rstd);
    });
    report("group_norm 128c fwd", t_ref, t_fast, max_diff(y_ref.v, y_fast.v));
}

void bench_relu(int reps, Rng &rng) {
    namespace ref = cfx::nn::ref;
    namespace fast = cfx::nn::fast;
    Tensor<float> x(16, 64, 32, 32), y_ref(16, 64, 32, 32), y_fast(16, 64, 32, 32);
    fill(x, rng);
    const double t_ref = best_ms(reps, [&] { ref::relu_forward(x, y_ref); });
    const double t_fast = best_ms(reps, [&] { fast::relu_forward(x, y_fast); });
    report("relu 1M fwd", t_ref, t_fast, max_diff(y_ref.v, y_fast.v));
}

} // namespace

int main(int argc, char **argv) {
    const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
    Rng rng(42);
    std::printf("kernel benchmark, best of %d runs\n", reps);
    std::printf("%-28s %10s %10s %10s %12s\n", "case", "ref ms", "fast ms", "speedup",
                "max |diff|");
    bench_conv({"conv 7x7 64->64 32x32", 4, 64, 64, 32, 32, {7, 1, 3, 0}}, reps, rng);
    bench_conv({"conv 3x3/2 64->128 32x32", 4, 64, 128, 32, 32, {3, 2, 1, 0}}, reps, rng);
    bench_conv({"conv 3x3 256->256 4x4", 4, 256, 256, 4, 4, {3, 1, 1, 0}}, reps, rng);
    bench_tconv({"tconv 3x3/2 128->64 16x16", 4, 128, 64, 16, 16, {3, 2, 1, 1}}, reps, rng);
    bench_group_norm(reps, rng);
    bench_relu(reps, rng);
    return 0;
}
