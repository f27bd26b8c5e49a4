// SPDX-License-Identifier: Apache-2.0
//
// Multi-user downlink study: statistical precoders built from perfect,
// translated, and linearly extrapolated target-band fingerprints, compared by
// Monte Carlo sum rate over random user placements.

#pragma once

#include <vector>

#include "cfx/config.hpp"
#include "cfx/eval.hpp"

namespace cfx::eval {

// Mean sum rates of one SNR point, averaged over user placements.
struct MethodRates {
    double snr_db = 0.0;
    double perfect_csi = 0.0;
    double translator = 0.0;
    double linear_baseline = 0.0;
};

struct SumRateStudy {
    std::vector<MethodRates> points; // one per configured SNR value
    int users = 0;
    int drops = 0;
    int draws = 0;
};

// Draws cfg.sumrate.drops fresh propagation scenes, places cfg.sumrate.users
// users on distinct grid cells, designs per-method precoders at the target
// band, and averages the Monte Carlo sum rate per SNR point. All methods see
// identical channel draws, so rate gaps come from the precoders alone.
SumRateStudy run_sumrate_study(const nn::TranslatorPair &pair, const RunConfig &cfg);

} // namespace cfx::eval
