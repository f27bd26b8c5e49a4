// SPDX-License-Identifier: Apache-2.0
//
// Joint training of a translator pair: basic losses in both directions plus
// a cycle-consistency loss whose weight follows a configurable schedule over
// the normalized step index.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfx/fingerprint.hpp"
#include "cfx/nn/checkpoint.hpp"

namespace cfx::train {

// Cycle-loss weight schedules f(ω) over the normalized step index ω = d/D.
enum class WeightKind : uint8_t {
    kLinearInc = 0, // ω
    kCubicInc,      // ω³
    kExpInc,        // 1 − e^{−3ω}
    kConstant,      // 0.5
    kLinearDec,     // 1 − ω
    kCubicDec,      // 1 − ω³
    kExpDec,        // e^{−3ω}
    kZero,          // 0 (cycle loss disabled)
};

double weight_value(WeightKind kind, double omega);
// f(d/D) for 1-based step d of D; throws ConfigError when d is out of range.
double weight_at(WeightKind kind, uint64_t d, uint64_t total);
const char *weight_kind_name(WeightKind kind);
// Accepts long names ("linear_inc") and short labels ("f1").
WeightKind weight_kind_from_name(const std::string &name);

struct TrainConfig {
    int epochs = 80;
    int decay_start_epoch = 40; // learning rate is constant through this epoch
    double learning_rate = 1e-4;
    int batch_size = 16;
    WeightKind weight_fn = WeightKind::kLinearInc;
    bool use_cycle_loss = true;
    bool use_refine = true; // evaluation-time pooling, carried for reports
    uint64_t seed = 1;
    int checkpoint_every = 1; // epochs between checkpoint rewrites

    void validate() const;
};

// Learning rate at continuous epoch position e (0 = start of training).
double schedule_lr(const TrainConfig &cfg, double epoch_pos);

struct LossBundle {
    double basic_ij = 0.0;
    double basic_ji = 0.0;
    double cycle = 0.0;
    double weight = 0.0;
    double weighted_cycle = 0.0;
    double joint = 0.0;
    double lr = 0.0;
};

// Batch-mean squared error divided by the per-sample element count; the
// reduction used by every loss term.
double basic_loss(const nn::TranslatorNetwork<float> &net, const nn::Tensor<float> &x_i,
                  const nn::Tensor<float> &x_j);

// Sum of the two round-trip reconstruction errors.
double cycle_loss(const nn::TranslatorNetwork<float> &net_ij,
                  const nn::TranslatorNetwork<float> &net_ji, const nn::Tensor<float> &x_i,
                  const nn::Tensor<float> &x_j);

// Dataset images are HWC in [0,1]; the networks consume NCHW in [-1,1].
nn::Tensor<float> make_batch(const fp::Dataset &ds, const std::vector<int> &indices,
                             bool band_i);
std::vector<float> net_output_to_image(const nn::Tensor<float> &y, int sample);

struct TrainResult {
    nn::TranslatorPair pair;
    std::vector<LossBundle> epochs; // per-epoch means
    std::vector<LossBundle> steps;  // per-step values; joint identity exact
};

// Fresh training run. run_dir, when non-empty, receives loss_log.csv
// (per-epoch), loss_steps.csv (per-step), and checkpoint.cfck rewritten at
// the configured cadence. Aborts with NumericalError on non-finite loss,
// leaving the last finite checkpoint on disk.
TrainResult train_pair(const fp::Dataset &ds, const nn::ArchitectureConfig &arch_ij,
                       const nn::ArchitectureConfig &arch_ji, const TrainConfig &cfg,
                       const std::string &run_dir = "");

// Continues a loaded checkpoint to cfg.epochs; schedule position and data
// order resume where the checkpoint left off.
TrainResult resume_pair(nn::TranslatorPair pair, const fp::Dataset &ds, const TrainConfig &cfg,
                        const std::string &run_dir = "");

} // namespace cfx::train
