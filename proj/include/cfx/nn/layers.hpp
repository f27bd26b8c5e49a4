// SPDX-License-Identifier: Apache-2.0
//
// Layer objects over the kernels, with an explicit tape so the same network
// can appear several times in one computation graph (the cycle path runs
// each network twice per step). forward pushes whatever backward needs onto
// the caller's tape; backward pops in reverse and accumulates parameter
// gradients.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cfx/nn/kernels.hpp"
#include "cfx/rng.hpp"

namespace cfx::nn {

template <typename T> struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<T> w; // values
    std::vector<T> g; // gradient, same layout

    ParamTensor(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
        size_t count = 1;
        for (int d : shape)
            count *= size_t(d);
        w.assign(count, T(0));
        g.assign(count, T(0));
    }
    size_t count() const { return w.size(); }
};

// Stack of saved activations for one forward pass.
template <typename T> class Tape {
  public:
    void push(Tensor<T> &&t) { stack_.emplace_back(std::move(t)); }
    void push_copy(const Tensor<T> &t) { stack_.push_back(t); }
    Tensor<T> pop() {
        Tensor<T> t = std::move(stack_.back());
        stack_.pop_back();
        return t;
    }
    bool empty() const { return stack_.empty(); }

  private:
    std::vector<Tensor<T>> stack_;
};

template <typename T> class Layer {
  public:
    virtual ~Layer() = default;
    // tape == nullptr runs inference only (nothing saved).
    virtual Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) = 0;
    virtual Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) = 0;
    virtual void collect_params(std::vector<ParamTensor<T> *> &out) { (void)out; }
    virtual void init(Rng &rng) { (void)rng; }
};

template <typename T> class Conv2d : public Layer<T> {
  public:
    Conv2d(const std::string &name, int in_c, int out_c, ConvGeom geom, double init_gain = 2.0)
        : in_c_(in_c), out_c_(out_c), geom_(geom), init_gain_(init_gain),
          w_(name + ".w", {out_c, in_c, geom.kernel, geom.kernel}), b_(name + ".b", {out_c}) {}

    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) override {
        if (x.c != in_c_)
            throw ConfigError("conv " + w_.name + ": channel mismatch");
        Tensor<T> y(x.n, out_c_, conv_out_dim(x.h, geom_), conv_out_dim(x.w, geom_));
        conv2d_forward(x, w_.w, b_.w, geom_, y);
        if (tape != nullptr)
            tape->push_copy(x);
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) override {
        Tensor<T> x = tape.pop();
        conv2d_backward_filter(x, dy, geom_, w_.g, b_.g);
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        conv2d_backward_data(dy, w_.w, geom_, dx);
        return dx;
    }

    void collect_params(std::vector<ParamTensor<T> *> &out) override {
        out.push_back(&w_);
        out.push_back(&b_);
    }

    // Zero-mean normal, variance init_gain / fan_in; biases zero.
    void init(Rng &rng) override {
        double std_dev = std::sqrt(init_gain_ / (double(in_c_) * geom_.kernel * geom_.kernel));
        for (auto &v : w_.w)
            v = T(rng.normal() * std_dev);
        std::fill(b_.w.begin(), b_.w.end(), T(0));
    }

    const ConvGeom &geom() const { return geom_; }

  private:
    int in_c_, out_c_;
    ConvGeom geom_;
    double init_gain_;
    ParamTensor<T> w_, b_;
};

template <typename T> class TransConv2d : public Layer<T> {
  public:
    TransConv2d(const std::string &name, int in_c, int out_c, ConvGeom geom)
        : in_c_(in_c), out_c_(out_c), geom_(geom),
          w_(name + ".w", {in_c, out_c, geom.kernel, geom.kernel}), b_(name + ".b", {out_c}) {}

    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) override {
        if (x.c != in_c_)
            throw ConfigError("tconv " + w_.name + ": channel mismatch");
        Tensor<T> y(x.n, out_c_, tconv_out_dim(x.h, geom_), tconv_out_dim(x.w, geom_));
        tconv2d_forward(x, w_.w, b_.w, geom_, y);
        if (tape != nullptr)
            tape->push_copy(x);
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) override {
        Tensor<T> x = tape.pop();
        tconv2d_backward_filter(x, dy, geom_, w_.g, b_.g);
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        tconv2d_backward_data(dy, w_.w, geom_, dx);
        return dx;
    }

    void collect_params(std::vector<ParamTensor<T> *> &out) override {
        out.push_back(&w_);
        out.push_back(&b_);
    }

    // Stride-2 upsampling spreads fan-in over stride^2 output positions.
    void init(Rng &rng) override {
        double fan = double(in_c_) * geom_.kernel * geom_.kernel /
                     (double(geom_.stride) * geom_.stride);
        double std_dev = std::sqrt(2.0 / fan);
        for (auto &v : w_.w)
            v = T(rng.normal() * std_dev);
        std::fill(b_.w.begin(), b_.w.end(), T(0));
    }

  private:
    int in_c_, out_c_;
    ConvGeom geom_;
    ParamTensor<T> w_, b_;
};

template <typename T> class GroupNorm : public Layer<T> {
  public:
    GroupNorm(const std::string &name, int channels, int groups, T eps)
        : channels_(channels), groups_(groups), eps_(eps), gamma_(name + ".gamma", {groups}),
          beta_(name + ".beta", {groups}) {
        if (groups < 1 || channels % groups != 0)
            throw ConfigError("group norm " + name + ": groups must divide channels");
        std::fill(gamma_.w.begin(), gamma_.w.end(), T(1));
    }

    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) override {
        if (x.c != channels_)
            throw ConfigError("group norm " + gamma_.name + ": channel mismatch");
        Tensor<T> y(x.n, x.c, x.h, x.w);
        if (tape != nullptr) {
            Tensor<T> xhat(x.n, x.c, x.h, x.w);
            Tensor<T> rstd(x.n, groups_, 1, 1);
            group_norm_forward(x, gamma_.w, beta_.w, groups_, eps_, y, &xhat, &rstd);
            tape->push(std::move(xhat));
            tape->push(std::move(rstd));
        } else {
            group_norm_forward<T>(x, gamma_.w, beta_.w, groups_, eps_, y, nullptr, nullptr);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) override {
        Tensor<T> rstd = tape.pop();
        Tensor<T> xhat = tape.pop();
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        group_norm_backward(dy, xhat, rstd, gamma_.w, groups_, dx, gamma_.g, beta_.g);
        return dx;
    }

    void collect_params(std::vector<ParamTensor<T> *> &out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

    void init(Rng &rng) override {
        (void)rng;
        std::fill(gamma_.w.begin(), gamma_.w.end(), T(1));
        std::fill(beta_.w.begin(), beta_.w.end(), T(0));
    }

  private:
    int channels_, groups_;
    T eps_;
    ParamTensor<T> gamma_, beta_;
};

template <typename T> class ReLU : public Layer<T> {
  public:
    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) override {
        Tensor<T> y(x.n, x.c, x.h, x.w);
        relu_forward(x, y);
        if (tape != nullptr)
            tape->push_copy(y);
        return y;
    }
    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) override {
        Tensor<T> y = tape.pop();
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        relu_backward(dy, y, dx);
        return dx;
    }
};

template <typename T> class Tanh : public Layer<T> {
  public:
    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) override {
        Tensor<T> y(x.n, x.c, x.h, x.w);
        tanh_forward(x, y);
        if (tape != nullptr)
            tape->push_copy(y);
        return y;
    }
    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) override {
        Tensor<T> y = tape.pop();
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        tanh_backward(dy, y, dx);
        return dx;
    }
};

// Two stride-1 convolutions with a ReLU after the first and a skip addition;
// no normalization inside the block.
template <typename T> class ResidualBlock : public Layer<T> {
  public:
    ResidualBlock(const std::string &name, int channels, ConvGeom geom)
        : conv1_(name + ".conv1", channels, channels, geom),
          conv2_(name + ".conv2", channels, channels, geom) {}

    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape) override {
        Tensor<T> h = conv1_.forward(x, tape);
        Tensor<T> a = relu_.forward(h, tape);
        Tensor<T> y = conv2_.forward(a, tape);
        if (!y.same_shape(x))
            throw ConfigError("residual block: shape change inside block");
        const long n = long(y.count());
#pragma omp parallel for simd schedule(static)
        for (long i = 0; i < n; i++)
            y.v[i] += x.v[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) override {
        Tensor<T> da = conv2_.backward(dy, tape);
        Tensor<T> dh = relu_.backward(da, tape);
        Tensor<T> dx = conv1_.backward(dh, tape);
        const long n = long(dx.count());
#pragma omp parallel for simd schedule(static)
        for (long i = 0; i < n; i++)
            dx.v[i] += dy.v[i];
        return dx;
    }

    void collect_params(std::vector<ParamTensor<T> *> &out) override {
        conv1_.collect_params(out);
        conv2_.collect_params(out);
    }

    void init(Rng &rng) override {
        conv1_.init(rng);
        conv2_.init(rng);
    }

  private:
    Conv2d<T> conv1_, conv2_;
    ReLU<T> relu_;
};

} // namespace cfx::nn
