// SPDX-License-Identifier: Apache-2.0
//
// End-to-end dataset synthesis: draws one propagation scene per pair, builds
// both bands' fingerprints, normalizes with training-split statistics, and
// writes the train/test dataset files.

#pragma once

#include <cstdint>
#include <string>

#include "cfx/fingerprint.hpp"

namespace cfx::gen {

struct GenConfig {
    radio::RegionGrid grid;
    radio::TrajectoryPlan plan;
    radio::BandConfig band_i{2.0e9, 8, 8, 0.5};
    radio::BandConfig band_j{5.0e9, 10, 10, 0.5};
    radio::Scenario scenario = radio::Scenario::kLos;
    radio::SceneParams scene_params;
    fp::PasMode mode = fp::PasMode::kEvdSorted;
    int rho = 2;
    int varrho = 2;
    int train_count = 900;
    int test_count = 100;
    uint64_t seed = 1;

    void validate() const;
};

// Scene seed of dataset pair `index` (train pairs first, then test pairs);
// lets downstream consumers rebuild the exact propagation scene of a pair.
uint64_t scene_seed_for(uint64_t master_seed, int index);

struct GenManifest {
    std::string train_path, test_path;
    uint64_t train_hash = 0, test_hash = 0;
    int train_count = 0, test_count = 0;
    uint64_t seed = 0;
};

// Writes <out_dir>/train.cfds and <out_dir>/test.cfds. Normalization ranges
// come from the training split only; test pairs reuse them (their pixel
// values may slightly exceed [0,1]).
GenManifest generate_datasets(const GenConfig &cfg, const std::string &out_dir);

} // namespace cfx::gen
