// SPDX-License-Identifier: Apache-2.0
//
// The jointly trained network pair with its optimizer and progress state,
// and the versioned checkpoint file that makes training resumable.

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "cfx/fingerprint.hpp"
#include "cfx/nn/translator.hpp"

namespace cfx::nn {

// Moment buffers aligned with the concatenated parameter list (all tensors
// of the i->j network, then all of j->i).
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t steps = 0; // updates applied so far
    std::vector<std::vector<float>> m, v;
};

struct TranslatorPair {
    TranslatorNetwork<float> ij, ji;
    AdamState adam;
    uint32_t epochs_done = 0;
    uint64_t train_seed = 0;
    std::array<uint64_t, 4> shuffle_state{}; // dataset-order RNG, mid-run
    // Dataset identity carried along so evaluation can reject mismatches and
    // denormalize predictions without re-reading the training split.
    fp::NormalizationStats stats_i, stats_j;
    double frequency_i_hz = 0.0, frequency_j_hz = 0.0;
    radio::Scenario scenario = radio::Scenario::kLos;
    fp::PasMode mode = fp::PasMode::kEvdSorted;

    TranslatorPair(const ArchitectureConfig &cfg_ij, const ArchitectureConfig &cfg_ji,
                   uint64_t seed);

    // Parameter views in checkpoint order.
    std::vector<ParamTensor<float> *> param_union();
    std::vector<const ParamTensor<float> *> param_union() const;
};

void save_checkpoint(const std::string &path, const TranslatorPair &pair);
TranslatorPair load_checkpoint(const std::string &path);

} // namespace cfx::nn
