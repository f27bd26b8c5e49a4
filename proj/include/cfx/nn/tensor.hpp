// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense NCHW tensor used by the translator network. Templated on the
// scalar type so gradient checks can run the whole stack in double precision.

#pragma once

#include <cstddef>
#include <vector>

namespace cfx::nn {

template <typename T> struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(size_t(n_) * c_ * h_ * w_, T(0)) {}

    size_t count() const { return v.size(); }
    T *data() { return v.data(); }
    const T *data() const { return v.data(); }

    // Pointer to the (sample, channel) plane.
    T *plane(int in, int ic) { return v.data() + (size_t(in) * c + ic) * size_t(h) * w; }
    const T *plane(int in, int ic) const { return v.data() + (size_t(in) * c + ic) * size_t(h) * w; }

    T &at(int in, int ic, int iy, int ix) {
        return v[((size_t(in) * c + ic) * h + iy) * w + ix];
    }
    T at(int in, int ic, int iy, int ix) const {
        return v[((size_t(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor &o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

} // namespace cfx::nn
