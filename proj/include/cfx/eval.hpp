// SPDX-License-Identifier: Apache-2.0
//
// Scoring of extrapolated fingerprints: NMSE against truth, the linear
// resampling baseline, covariance reconstruction, statistical precoding, and
// the multi-user sum-rate Monte Carlo.

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cfx/nn/checkpoint.hpp"

namespace cfx::eval {

struct NmseResult {
    double linear = 0.0; // mean over beam channels of per-channel error ratios
    double db = -300.0;  // 10 log10(linear), floored at -300
    std::vector<double> per_channel;
    // Channels that actually entered the mean. Dataset-level scoring skips
    // channels whose pooled truth energy is negligible (NaN in per_channel);
    // the per-pair nmse op always scores all of them.
    size_t per_channel_informative = 0;
};

// Mean over beam channels m of |estimate_m - truth_m|^2_F / |truth_m|^2_F,
// each norm taken over the whole region. Throws NumericalError when a truth
// channel is identically zero.
NmseResult nmse(const fp::GridTensor &estimate, const fp::GridTensor &truth);
NmseResult nmse(const fp::Fingerprint &estimate, const fp::Fingerprint &truth);

// Band-to-band extrapolation assuming unchanged angular structure: each
// cell's PAS is laid out on its beam grid, bilinearly resampled in the
// normalized sin-angle coordinates shared by half-wavelength arrays, and
// rescaled to the source cell's total power. evd_sorted fingerprints are
// re-sorted descending after resampling.
fp::Fingerprint linear_baseline_extrapolate(const fp::Fingerprint &fp_i,
                                            const radio::BandConfig &band_i,
                                            const radio::BandConfig &band_j);

// R = A diag(pas) A^H / M; inverse of beam_pas on beam-diagonal covariances
// in dft_diag mode, eigenvalue placement on the beam basis in evd_sorted
// mode. Rejects negative entries beyond numerical slack.
Eigen::MatrixXcd reconstruct_covariance(const std::vector<double> &pas,
                                        const radio::BandConfig &band, fp::PasMode mode);

// Signal-to-leakage-plus-noise beamformers from per-user covariances, equal
// power split of the total constraint. Covariances are jointly rescaled to
// unit average per-antenna power first, so a common positive scaling of the
// inputs leaves the directions unchanged.
std::vector<Eigen::VectorXcd> design_precoder(const std::vector<Eigen::MatrixXcd> &covariances,
                                              double noise_variance, double power);

struct SumRateScenario {
    std::vector<std::pair<int, int>> user_cells; // (row, col) per user
    double noise_variance = 1.0;
    double power = 1.0; // total transmit power across users
    int draws = 200;    // Monte Carlo channel draws per user
    uint64_t seed = 1;
};

struct SumRateResult {
    double total = 0.0;
    std::vector<double> per_user;
};

// channels(user, draw) must yield the user's channel vector for that draw.
using ChannelSource = std::function<Eigen::VectorXcd(int user, int draw)>;

SumRateResult sum_rate(const SumRateScenario &scenario,
                       const std::vector<Eigen::VectorXcd> &precoders,
                       const ChannelSource &channels);

// Channel draws with fresh per-draw path phases from the scene's clusters.
ChannelSource scene_channel_source(const radio::PropagationScene &scene,
                                   const radio::RegionGrid &grid,
                                   const radio::BandConfig &band,
                                   const SumRateScenario &scenario);

// Normalized [0,1] HWC predictions for every test pair, both directions.
struct PredictionSet {
    std::vector<std::vector<float>> ij; // band-j images predicted from band i
    std::vector<std::vector<float>> ji; // band-i images predicted from band j
};

PredictionSet predict_all(const nn::TranslatorPair &pair, const fp::Dataset &test,
                          int batch_size = 8);

struct EvalReport {
    std::string method;
    bool used_refine = true;
    bool used_cycle = true;
    NmseResult dir_ij, dir_ji;
};

// Denormalizes predictions and truth to physical scale, optionally pools
// pixel blocks back to grid cells, and scores both directions.
EvalReport score_predictions(const fp::Dataset &test, const PredictionSet &preds,
                             bool use_refine, const std::string &label);

EvalReport eval_pipeline(const nn::TranslatorPair &pair, const fp::Dataset &test,
                         bool use_refine, const std::string &label);

// The same scoring applied to the linear baseline (grid level; the pixel
// refinement does not apply).
EvalReport eval_linear_baseline(const fp::Dataset &test, const radio::BandConfig &band_i,
                                const radio::BandConfig &band_j);

} // namespace cfx::eval
