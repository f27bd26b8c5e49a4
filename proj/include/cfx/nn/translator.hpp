// SPDX-License-Identifier: Apache-2.0
//
// Encoder / residual / decoder translation network mapping a fingerprint
// image of one band to another band's channel layout. Two instances of this
// network, trained jointly, form the band-pair translator.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cfx/nn/layers.hpp"

namespace cfx::nn {

struct ArchitectureConfig {
    int in_channels = 64;
    int out_channels = 100;
    int base_width = 64;   // width after the stem convolution
    int width_cap = 512;   // encoder widths double per stage up to this
    int encoder_stages = 4;
    int decoder_stages = 4;
    int residual_blocks = 6;
    int groupnorm_groups = 8;
    float gn_eps = 1e-5f;
    // Layer geometry: large-receptive-field stem and output, stride-2
    // down/upsampling stages, stride-1 residual convolutions.
    ConvGeom stem_geom{7, 1, 3, 0};
    ConvGeom stage_geom{3, 2, 1, 0};
    ConvGeom upsample_geom{3, 2, 1, 1};
    ConvGeom residual_geom{3, 1, 1, 0};

    // Width after the stem and after each encoder stage.
    std::vector<int> encoder_widths() const {
        std::vector<int> w(size_t(encoder_stages) + 1);
        w[0] = base_width;
        for (int s = 1; s <= encoder_stages; s++)
            w[size_t(s)] = std::min(w[size_t(s) - 1] * 2, width_cap);
        return w;
    }

    void validate() const {
        if (in_channels < 1 || out_channels < 1)
            throw ConfigError("network: channel counts must be positive");
        if (base_width < 1 || width_cap < base_width)
            throw ConfigError("network: base width must be positive and at most the cap");
        if (encoder_stages < 1 || decoder_stages != encoder_stages)
            throw ConfigError("network: encoder and decoder stage counts must match and be "
                              "positive");
        if (residual_blocks < 0)
            throw ConfigError("network: residual block count must be non-negative");
        if (groupnorm_groups < 1)
            throw ConfigError("network: group count must be positive");
        for (int w : encoder_widths())
            if (w % groupnorm_groups != 0)
                throw ConfigError("network: group count must divide every stage width");
    }
};

template <typename T> class TranslatorNetwork {
  public:
    explicit TranslatorNetwork(const ArchitectureConfig &cfg) : cfg_(cfg) {
        cfg.validate();
        auto widths = cfg.encoder_widths();
        add<Conv2d<T>>("input.conv", cfg.in_channels, widths[0], cfg.stem_geom);
        add<ReLU<T>>();
        for (int s = 1; s <= cfg.encoder_stages; s++) {
            std::string base = "enc" + std::to_string(s);
            add<Conv2d<T>>(base + ".conv", widths[size_t(s) - 1], widths[size_t(s)],
                           cfg.stage_geom);
            add<GroupNorm<T>>(base + ".gn", widths[size_t(s)], cfg.groupnorm_groups,
                              T(cfg.gn_eps));
            add<ReLU<T>>();
        }
        int deep = widths[size_t(cfg.encoder_stages)];
        for (int r = 1; r <= cfg.residual_blocks; r++)
            add<ResidualBlock<T>>("res" + std::to_string(r), deep, cfg.residual_geom);
        for (int s = 1; s <= cfg.decoder_stages; s++) {
            std::string base = "dec" + std::to_string(s);
            int from = widths[size_t(cfg.encoder_stages - s + 1)];
            int to = widths[size_t(cfg.encoder_stages - s)];
            add<TransConv2d<T>>(base + ".tconv", from, to, cfg.upsample_geom);
            add<GroupNorm<T>>(base + ".gn", to, cfg.groupnorm_groups, T(cfg.gn_eps));
            add<ReLU<T>>();
        }
        // Unit gain on the stem of the output module keeps pre-Tanh values
        // from saturating at initialization.
        add<Conv2d<T>>("output.conv", widths[0], cfg.out_channels, cfg.stem_geom, 1.0);
        add<Tanh<T>>();
        for (auto &l : layers_)
            l->collect_params(params_);
    }

    const ArchitectureConfig &config() const { return cfg_; }

    Tensor<T> forward(const Tensor<T> &x, Tape<T> *tape = nullptr) const {
        if (x.c != cfg_.in_channels)
            throw ConfigError("network forward: input has wrong channel count");
        int div = 1 << cfg_.encoder_stages;
        if (x.h % div != 0 || x.w % div != 0)
            throw ConfigError("network forward: spatial dims must be divisible by 2^stages");
        Tensor<T> cur = layers_.front()->forward(x, tape);
        for (size_t i = 1; i < layers_.size(); i++)
            cur = layers_[i]->forward(cur, tape);
        return cur;
    }

    // Consumes the tape produced by the matching forward call and adds
    // parameter gradients in place.
    Tensor<T> backward(const Tensor<T> &dy, Tape<T> &tape) const {
        Tensor<T> cur = layers_.back()->backward(dy, tape);
        for (size_t i = layers_.size() - 1; i-- > 0;)
            cur = layers_[i]->backward(cur, tape);
        return cur;
    }

    std::vector<ParamTensor<T> *> &params() { return params_; }
    const std::vector<ParamTensor<T> *> &params() const { return params_; }

    void zero_grads() {
        for (auto *p : params_)
            std::fill(p->g.begin(), p->g.end(), T(0));
    }

    void init(Rng &rng) {
        for (auto &l : layers_)
            l->init(rng);
    }

  private:
    template <typename L, typename... Args> void add(Args &&...args) {
        layers_.emplace_back(std::make_unique<L>(std::forward<Args>(args)...));
    }

    ArchitectureConfig cfg_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<ParamTensor<T> *> params_;
};

// Fan-in-scaled zero-mean initialization, deterministic under seed. The γ=1,
// b=0 group norm state is set by layer construction and re-asserted here.
template <typename T>
TranslatorNetwork<T> init_parameters(const ArchitectureConfig &cfg, uint64_t seed) {
    TranslatorNetwork<T> net(cfg);
    Rng rng(derive_seed(seed, {uint64_t(kStreamInit)}));
    net.init(rng);
    return net;
}

struct ModelCost {
    uint64_t parameter_count = 0; // kernels, biases, and norm affine terms
    uint64_t flops = 0;           // multiply-accumulates of all conv layers
    uint64_t memory_bytes = 0;    // f32 kernel storage
};

// Multiply-accumulates of one convolution: H·W·C_out·C_in·K² with (H, W)
// the spatial size the kernel slides over.
inline uint64_t conv_layer_flops(int h, int w, int c_out, int c_in, int kernel) {
    return uint64_t(h) * uint64_t(w) * uint64_t(c_out) * uint64_t(c_in) * uint64_t(kernel) *
           uint64_t(kernel);
}

// Per-layer cost products. A convolution contributes H·W·C_out·C_in·K² with
// H·W the side of the GEMM it performs: output spatial size for ordinary
// convolutions, input spatial size for transposed ones (the two coincide at
// stride 1). Spatial dims refer to the network input, default 32×32.
inline ModelCost count_params_flops(const ArchitectureConfig &cfg, int in_h = 32,
                                    int in_w = 32) {
    cfg.validate();
    ModelCost cost;
    auto conv = [&](int c_in, int c_out, const ConvGeom &g, int h_in, int w_in, bool transposed,
                    bool bias = true) {
        uint64_t kernel = uint64_t(c_in) * uint64_t(c_out) * uint64_t(g.kernel) *
                          uint64_t(g.kernel);
        cost.parameter_count += kernel + (bias ? uint64_t(c_out) : 0);
        cost.memory_bytes += 4 * kernel;
        int h = transposed ? h_in : conv_out_dim(h_in, g);
        int w = transposed ? w_in : conv_out_dim(w_in, g);
        cost.flops += conv_layer_flops(h, w, c_out, c_in, g.kernel);
        return transposed ? std::pair{tconv_out_dim(h_in, g), tconv_out_dim(w_in, g)}
                          : std::pair{conv_out_dim(h_in, g), conv_out_dim(w_in, g)};
    };
    auto norm = [&] { cost.parameter_count += 2 * uint64_t(cfg.groupnorm_groups); };

    auto widths = cfg.encoder_widths();
    auto [h, w] = conv(cfg.in_channels, widths[0], cfg.stem_geom, in_h, in_w, false);
    for (int s = 1; s <= cfg.encoder_stages; s++) {
        std::tie(h, w) = conv(widths[size_t(s) - 1], widths[size_t(s)], cfg.stage_geom, h, w,
                              false);
        norm();
    }
    int deep = widths[size_t(cfg.encoder_stages)];
    for (int r = 0; r < cfg.residual_blocks; r++) {
        std::tie(h, w) = conv(deep, deep, cfg.residual_geom, h, w, false);
        std::tie(h, w) = conv(deep, deep, cfg.residual_geom, h, w, false);
    }
    for (int s = 1; s <= cfg.decoder_stages; s++) {
        int from = widths[size_t(cfg.encoder_stages - s + 1)];
        int to = widths[size_t(cfg.encoder_stages - s)];
        std::tie(h, w) = conv(from, to, cfg.upsample_geom, h, w, true);
        norm();
    }
    conv(widths[0], cfg.out_channels, cfg.stem_geom, h, w, false);
    return cost;
}

} // namespace cfx::nn
