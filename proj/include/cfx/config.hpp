// SPDX-License-Identifier: Apache-2.0
//
// One run configuration covering generation, training, evaluation, and the
// sum-rate study, serialized as commented JSON.

#pragma once

#include <string>
#include <vector>

#include "cfx/datagen.hpp"
#include "cfx/nn/translator.hpp"
#include "cfx/train.hpp"

namespace cfx {

struct SumRateConfig {
    int users = 4;
    std::vector<double> snr_db = {0.0, 10.0, 20.0};
    int draws = 200; // Monte Carlo channel draws per user placement
    int drops = 50;  // random user placements averaged per SNR point
    double power_constraint = 1.0;
};

struct RunConfig {
    uint64_t seed = 1;
    std::string output_dir = "runs";
    gen::GenConfig gen;
    // Translator widths; channel counts always follow the two bands.
    int base_width = 64;
    int width_cap = 512;
    int encoder_stages = 4;
    int residual_blocks = 6;
    int groupnorm_groups = 8;
    train::TrainConfig train;
    SumRateConfig sumrate;

    nn::ArchitectureConfig arch_ij() const;
    nn::ArchitectureConfig arch_ji() const;
    void validate() const;
};

std::string serialize_config(const RunConfig &cfg);
// Accepts // and /* */ comments; absent keys keep their defaults.
RunConfig parse_config(const std::string &json_text);
RunConfig load_config_file(const std::string &path);

} // namespace cfx
