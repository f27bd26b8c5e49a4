// SPDX-License-Identifier: Apache-2.0

#include "cfx/sumrate.hpp"

#include <algorithm>
#include <cmath>

#include "cfx/rng.hpp"

namespace cfx::eval {

namespace {

// Network prediction of the target-band fingerprint grid for one scene:
// normalize with the checkpoint's training ranges, translate, denormalize,
// pool pixel blocks back to cells.
fp::GridTensor translate_grid(const nn::TranslatorPair &pair, const fp::GridTensor &grid_i,
                              int rho, int varrho) {
    const fp::GridTensor norm = fp::normalize_with(grid_i, pair.stats_i);
    const fp::GridTensor img = fp::replicate_grid_cells(norm, rho, varrho);
    nn::Tensor<float> x(1, img.channels, img.rows, img.cols);
    for (int ch = 0; ch < img.channels; ++ch)
        for (int r = 0; r < img.rows; ++r)
            for (int c = 0; c < img.cols; ++c)
                x.at(0, ch, r, c) = float(2.0 * img.at(r, c, ch) - 1.0);
    const nn::Tensor<float> y = pair.ij.forward(x);
    fp::GridTensor out_img(y.h, y.w, y.c);
    for (int ch = 0; ch < y.c; ++ch)
        for (int r = 0; r < y.h; ++r)
            for (int c = 0; c < y.w; ++c)
                out_img.at(r, c, ch) = 0.5 * (double(y.at(0, ch, r, c)) + 1.0);
    const fp::GridTensor phys = fp::denormalize(out_img, pair.stats_j);
    return fp::pool_pixel_blocks(phys, rho, varrho);
}

// One cell's PAS clamped to nonnegative powers; network outputs can dip
// slightly below zero and the covariance reconstruction rejects that.
std::vector<double> cell_pas(const fp::GridTensor &g, int row, int col) {
    std::vector<double> s(size_t(g.channels));
    for (int ch = 0; ch < g.channels; ++ch)
        s[size_t(ch)] = std::max(0.0, g.at(row, col, ch));
    return s;
}

std::vector<Eigen::MatrixXcd> user_covariances(const fp::GridTensor &g,
                                               const std::vector<std::pair<int, int>> &cells,
                                               const radio::BandConfig &band, fp::PasMode mode) {
    std::vector<Eigen::MatrixXcd> covs;
    covs.reserve(cells.size());
    for (const auto &[row, col] : cells)
        covs.push_back(reconstruct_covariance(cell_pas(g, row, col), band, mode));
    return covs;
}

// Uniform draw of distinct cells via a partial Fisher-Yates pass.
std::vector<std::pair<int, int>> draw_user_cells(Rng &rng, int rows, int cols, int users) {
    std::vector<int> idx(size_t(rows) * cols);
    for (size_t i = 0; i < idx.size(); ++i)
        idx[i] = int(i);
    for (int u = 0; u < users; ++u)
        std::swap(idx[size_t(u)], idx[size_t(rng.uniform_int(u, int(idx.size()) - 1))]);
    std::vector<std::pair<int, int>> cells;
    cells.resize(size_t(users));
    for (int u = 0; u < users; ++u)
        cells[size_t(u)] = {idx[size_t(u)] / cols, idx[size_t(u)] % cols};
    return cells;
}

} // namespace

SumRateStudy run_sumrate_study(const nn::TranslatorPair &pair, const RunConfig &cfg) {
    cfg.validate();
    const auto &g = cfg.gen;
    if (pair.frequency_i_hz != g.band_i.frequency_hz ||
        pair.frequency_j_hz != g.band_j.frequency_hz)
        throw ConfigError("sum-rate study: checkpoint bands do not match the configuration");
    if (pair.mode != g.mode)
        throw ConfigError("sum-rate study: checkpoint PAS mode does not match the configuration");
    if (pair.stats_i.channels() != g.band_i.total_antennas() ||
        pair.stats_j.channels() != g.band_j.total_antennas())
        throw ConfigError("sum-rate study: checkpoint channel counts do not match the bands");
    if (cfg.sumrate.users > g.grid.cell_count())
        throw ConfigError("sum-rate study: more users than grid cells");

    SumRateStudy study;
    study.users = cfg.sumrate.users;
    study.drops = cfg.sumrate.drops;
    study.draws = cfg.sumrate.draws;
    study.points.resize(cfg.sumrate.snr_db.size());
    for (size_t p = 0; p < cfg.sumrate.snr_db.size(); ++p)
        study.points[p].snr_db = cfg.sumrate.snr_db[p];

    // Separate master so study scenes never collide with dataset scenes.
    const uint64_t master = derive_seed(cfg.seed, {kStreamUsers});
    const double power = cfg.sumrate.power_constraint;

    for (int drop = 0; drop < cfg.sumrate.drops; ++drop) {
        const uint64_t scene_seed = derive_seed(master, {kStreamScene, uint64_t(drop)});
        const auto scene = radio::generate_scene(g.grid, g.scenario, scene_seed, g.scene_params);
        const auto fp_i =
            fp::assemble_fingerprint_from_scene(scene, g.grid, g.band_i, g.plan, g.mode);
        const auto fp_j =
            fp::assemble_fingerprint_from_scene(scene, g.grid, g.band_j, g.plan, g.mode);
        const fp::GridTensor net_j = translate_grid(pair, fp_i.values, g.rho, g.varrho);
        const fp::Fingerprint lin_j = linear_baseline_extrapolate(fp_i, g.band_i, g.band_j);

        Rng placement(derive_seed(master, {kStreamUsers, uint64_t(drop)}));
        const auto cells =
            draw_user_cells(placement, g.grid.rows(), g.grid.cols(), cfg.sumrate.users);

        const auto covs_true = user_covariances(fp_j.values, cells, g.band_j, g.mode);
        const auto covs_net = user_covariances(net_j, cells, g.band_j, g.mode);
        const auto covs_lin = user_covariances(lin_j.values, cells, g.band_j, g.mode);

        SumRateScenario scen;
        scen.user_cells = cells;
        scen.power = power;
        scen.draws = cfg.sumrate.draws;
        // Same seed for every method and SNR point of this drop: identical
        // channel draws, so rate gaps come from the precoders alone.
        scen.seed = derive_seed(master, {kStreamDraw, uint64_t(drop)});

        for (size_t p = 0; p < cfg.sumrate.snr_db.size(); ++p) {
            scen.noise_variance = power / std::pow(10.0, cfg.sumrate.snr_db[p] / 10.0);
            const auto source = scene_channel_source(scene, g.grid, g.band_j, scen);
            const auto rate_of = [&](const std::vector<Eigen::MatrixXcd> &covs) {
                const auto pre = design_precoder(covs, scen.noise_variance, power);
                return sum_rate(scen, pre, source).total;
            };
            study.points[p].perfect_csi += rate_of(covs_true);
            study.points[p].translator += rate_of(covs_net);
            study.points[p].linear_baseline += rate_of(covs_lin);
        }
    }
    for (auto &pt : study.points) {
        pt.perfect_csi /= cfg.sumrate.drops;
        pt.translator /= cfg.sumrate.drops;
        pt.linear_baseline /= cfg.sumrate.drops;
    }
    return study;
}

} // namespace cfx::eval
