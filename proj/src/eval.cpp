// SPDX-License-Identifier: Apache-2.0

#include "cfx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfx/common.hpp"
#include "cfx/train.hpp"

namespace cfx::eval {

using fp::GridTensor;

namespace {

double floor_db(double linear) {
    if (!(linear > 0.0))
        return -300.0;
    return std::max(-300.0, 10.0 * std::log10(linear));
}

// Piecewise-linear interpolation weights along one beam axis. Beam k
// (0-based) of an m-beam axis sits at sin-angle 2(k+1)/m - 1; queries
// outside the node range clamp to the nearest edge.
struct AxisWeight {
    int lo = 0, hi = 0;
    double w_hi = 0.0;
};

AxisWeight axis_weight(double u, int m) {
    double pos = (u + 1.0) * double(m) / 2.0 - 1.0;
    AxisWeight aw;
    if (pos <= 0.0 || m == 1)
        return aw;
    if (pos >= double(m - 1)) {
        aw.lo = aw.hi = m - 1;
        return aw;
    }
    aw.lo = int(std::floor(pos));
    aw.hi = aw.lo + 1;
    aw.w_hi = pos - double(aw.lo);
    return aw;
}

// Per-channel error aggregation with numerators and denominators pooled
// over all scored pairs.
struct ChannelAccum {
    std::vector<double> num, den;

    void ensure(int channels) {
        if (num.empty()) {
            num.assign(size_t(channels), 0.0);
            den.assign(size_t(channels), 0.0);
        }
    }
    void add(const GridTensor &estimate, const GridTensor &truth) {
        ensure(truth.channels);
        for (size_t i = 0; i < truth.count(); i++) {
            int ch = int(i % size_t(truth.channels));
            double d = estimate.v[i] - truth.v[i];
            num[size_t(ch)] += d * d;
            den[size_t(ch)] += truth.v[i] * truth.v[i];
        }
    }
    // Sorted-eigenvalue maps of low-rank covariances end in channels that
    // hold nothing but eigensolver noise (or exact zeros once clamped), so
    // no meaningful error ratio exists there. Dataset scoring averages over
    // the informative channels only: pooled truth energy at least 1e-12 of
    // the dominant channel's. Skipped channels get a NaN marker. Every
    // method pools over the same pairs, hence the same channel subset.
    NmseResult result() const {
        NmseResult r;
        r.per_channel.resize(num.size());
        const double floor = 1e-12 * *std::max_element(den.begin(), den.end());
        double acc = 0.0;
        size_t informative = 0;
        for (size_t ch = 0; ch < num.size(); ch++) {
            if (den[ch] <= floor) {
                r.per_channel[ch] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            r.per_channel[ch] = num[ch] / den[ch];
            acc += r.per_channel[ch];
            informative++;
        }
        if (informative == 0)
            throw NumericalError("nmse: every truth channel is identically zero");
        r.per_channel_informative = informative;
        r.linear = acc / double(informative);
        r.db = floor_db(r.linear);
        return r;
    }
};

GridTensor image_as_physical(const std::vector<float> &img, const fp::DatasetHeader &h,
                             bool band_i, const fp::NormalizationStats &stats) {
    GridTensor px = fp::image_to_grid_tensor(img, h.image_rows(), h.image_cols(),
                                             int(band_i ? h.channels_i : h.channels_j));
    return fp::denormalize(px, stats);
}

} // namespace

NmseResult nmse(const GridTensor &estimate, const GridTensor &truth) {
    if (estimate.rows != truth.rows || estimate.cols != truth.cols ||
        estimate.channels != truth.channels)
        throw ConfigError("nmse: estimate and truth shapes differ");
    NmseResult r;
    r.per_channel.resize(size_t(truth.channels));
    double acc = 0.0;
    for (int ch = 0; ch < truth.channels; ch++) {
        double num = 0.0, den = 0.0;
        for (int row = 0; row < truth.rows; row++)
            for (int col = 0; col < truth.cols; col++) {
                double d = estimate.at(row, col, ch) - truth.at(row, col, ch);
                num += d * d;
                den += truth.at(row, col, ch) * truth.at(row, col, ch);
            }
        if (den == 0.0)
            throw NumericalError("nmse: truth channel " + std::to_string(ch) +
                                 " is identically zero");
        r.per_channel[size_t(ch)] = num / den;
        acc += num / den;
    }
    r.per_channel_informative = size_t(truth.channels);
    r.linear = acc / double(truth.channels);
    r.db = floor_db(r.linear);
    return r;
}

NmseResult nmse(const fp::Fingerprint &estimate, const fp::Fingerprint &truth) {
    return nmse(estimate.values, truth.values);
}

fp::Fingerprint linear_baseline_extrapolate(const fp::Fingerprint &fp_i,
                                            const radio::BandConfig &band_i,
                                            const radio::BandConfig &band_j) {
    if (band_i.spacing_ratio != 0.5 || band_j.spacing_ratio != 0.5)
        throw ConfigError("linear baseline: requires half-wavelength arrays on both bands");
    band_i.validate();
    band_j.validate();
    if (fp_i.values.channels != band_i.total_antennas())
        throw ConfigError("linear baseline: fingerprint channel count does not match band");

    const int mz_i = band_i.antennas_z, my_i = band_i.antennas_y;
    const int mz_j = band_j.antennas_z, my_j = band_j.antennas_y;
    const int m_j = mz_j * my_j;

    // Target-node weights are cell-independent; precompute per axis.
    std::vector<AxisWeight> wz, wy;
    wz.resize(size_t(mz_j));
    wy.resize(size_t(my_j));
    for (int k = 0; k < mz_j; k++)
        wz[size_t(k)] = axis_weight(2.0 * (k + 1) / double(mz_j) - 1.0, mz_i);
    for (int k = 0; k < my_j; k++)
        wy[size_t(k)] = axis_weight(2.0 * (k + 1) / double(my_j) - 1.0, my_i);

    fp::Fingerprint out;
    out.values = GridTensor(fp_i.values.rows, fp_i.values.cols, m_j);
    out.band = band_j;
    out.mode = fp_i.mode;
    out.scene_seed = fp_i.scene_seed;
    out.scenario = fp_i.scenario;

    std::vector<double> target(size_t(m_j), 0.0);
    for (int row = 0; row < fp_i.values.rows; row++)
        for (int col = 0; col < fp_i.values.cols; col++) {
            const double *src = fp_i.values.cell(row, col);
            double source_power = 0.0;
            for (int k = 0; k < band_i.total_antennas(); k++)
                source_power += src[k];
            double target_power = 0.0;
            for (int z = 0; z < mz_j; z++)
                for (int y = 0; y < my_j; y++) {
                    const AxisWeight &az = wz[size_t(z)];
                    const AxisWeight &ay = wy[size_t(y)];
                    double v = (1.0 - az.w_hi) * (1.0 - ay.w_hi) * src[az.lo * my_i + ay.lo] +
                               (1.0 - az.w_hi) * ay.w_hi * src[az.lo * my_i + ay.hi] +
                               az.w_hi * (1.0 - ay.w_hi) * src[az.hi * my_i + ay.lo] +
                               az.w_hi * ay.w_hi * src[az.hi * my_i + ay.hi];
                    target[size_t(z * my_j + y)] = v;
                    target_power += v;
                }
            if (target_power > 0.0) {
                double scale = source_power / target_power;
                for (double &v : target)
                    v *= scale;
            } else {
                // All mass fell outside the target lattice; spread it evenly
                // so total power is still conserved.
                std::fill(target.begin(), target.end(), source_power / double(m_j));
            }
            if (fp_i.mode == fp::PasMode::kEvdSorted)
                std::sort(target.begin(), target.end(), std::greater<double>());
            std::copy(target.begin(), target.end(), out.values.cell(row, col));
        }
    return out;
}

Eigen::MatrixXcd reconstruct_covariance(const std::vector<double> &pas,
                                        const radio::BandConfig &band, fp::PasMode mode) {
    (void)mode; // both modes place the powers on the beam basis
    const int m = band.total_antennas();
    if (int(pas.size()) != m)
        throw ConfigError("reconstruct_covariance: pas length does not match band");
    double trace = 0.0;
    for (double v : pas)
        trace += std::max(v, 0.0);
    const double tol = 1e-6 * std::max(trace, 1e-30);
    Eigen::VectorXd s(m);
    for (int k = 0; k < m; k++) {
        if (pas[size_t(k)] < -tol)
            throw NumericalError("reconstruct_covariance: negative pas entry beyond tolerance");
        s[k] = std::max(pas[size_t(k)], 0.0);
    }
    Eigen::MatrixXcd basis = radio::beam_basis_matrix(band);
    return basis * (s / double(m)).asDiagonal() * basis.adjoint();
}

std::vector<Eigen::VectorXcd> design_precoder(const std::vector<Eigen::MatrixXcd> &covariances,
                                              double noise_variance, double power) {
    const int users = int(covariances.size());
    if (users == 0)
        throw ConfigError("design_precoder: no users");
    if (!(noise_variance > 0.0))
        throw ConfigError("design_precoder: noise variance must be positive");
    if (power < 0.0)
        throw ConfigError("design_precoder: power constraint must be non-negative");
    const long m = covariances.front().rows();
    double trace_sum = 0.0;
    for (const auto &r_mat : covariances) {
        if (r_mat.rows() != m || r_mat.cols() != m)
            throw ConfigError("design_precoder: covariance dimensions differ");
        trace_sum += r_mat.trace().real();
    }
    if (!(trace_sum > 0.0))
        throw ConfigError("design_precoder: covariances carry no power");

    // Joint rescale to unit average per-antenna power; leakage directions
    // then depend only on covariance shape, not on a global gain.
    const double scale = double(users) * double(m) / trace_sum;
    Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(m, m);
    for (const auto &r_mat : covariances)
        total += scale * r_mat;

    std::vector<Eigen::VectorXcd> precoders;
    precoders.resize(size_t(users));
    const double per_user = std::sqrt(power / double(users));
    for (int l = 0; l < users; l++) {
        Eigen::MatrixXcd signal = scale * covariances[size_t(l)];
        Eigen::MatrixXcd denom = total - signal;
        denom += noise_variance * Eigen::MatrixXcd::Identity(m, m);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(signal, denom);
        if (ges.info() != Eigen::Success)
            throw NumericalError("design_precoder: generalized eigensolver failed");
        Eigen::VectorXcd w = ges.eigenvectors().col(m - 1);
        precoders[size_t(l)] = (w / w.norm()) * per_user;
    }
    return precoders;
}

SumRateResult sum_rate(const SumRateScenario &scenario,
                       const std::vector<Eigen::VectorXcd> &precoders,
                       const ChannelSource &channels) {
    const int users = int(scenario.user_cells.size());
    if (users == 0 || int(precoders.size()) != users)
        throw ConfigError("sum_rate: user and precoder counts must match and be positive");
    if (scenario.draws < 1)
        throw ConfigError("sum_rate: needs at least one Monte Carlo draw");
    if (!(scenario.noise_variance > 0.0))
        throw ConfigError("sum_rate: noise variance must be positive");

    // One channel draw per (user, draw), then |h_{l,d}^H p_{l'}|^2 for every
    // combination.
    std::vector<Eigen::VectorXcd> draws(size_t(users) * size_t(scenario.draws));
#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int l = 0; l < users; l++)
        for (int d = 0; d < scenario.draws; d++)
            draws[size_t(l) * size_t(scenario.draws) + size_t(d)] = channels(l, d);
    for (const auto &h : draws)
        if (h.size() != precoders.front().size())
            throw ConfigError("sum_rate: channel and precoder dimensions differ");

    std::vector<double> gain(size_t(users) * size_t(scenario.draws) * size_t(users));
    auto gain_at = [&](int l, int d, int lp) -> double & {
        return gain[(size_t(l) * size_t(scenario.draws) + size_t(d)) * size_t(users) +
                    size_t(lp)];
    };
    for (int l = 0; l < users; l++)
        for (int d = 0; d < scenario.draws; d++) {
            const Eigen::VectorXcd &h = draws[size_t(l) * size_t(scenario.draws) + size_t(d)];
            for (int lp = 0; lp < users; lp++)
                gain_at(l, d, lp) = std::norm(h.dot(precoders[size_t(lp)]));
        }

    SumRateResult result;
    result.per_user.resize(size_t(users));
    for (int l = 0; l < users; l++) {
        // Interference power averaged over the same draw set.
        double interference = 0.0;
        for (int d = 0; d < scenario.draws; d++)
            for (int lp = 0; lp < users; lp++)
                if (lp != l)
                    interference += gain_at(l, d, lp);
        double v_l = scenario.noise_variance + interference / double(scenario.draws);
        double rate = 0.0;
        for (int d = 0; d < scenario.draws; d++)
            rate += std::log2(1.0 + gain_at(l, d, l) / v_l);
        result.per_user[size_t(l)] = rate / double(scenario.draws);
        result.total += result.per_user[size_t(l)];
    }
    return result;
}

ChannelSource scene_channel_source(const radio::PropagationScene &scene,
                                   const radio::RegionGrid &grid,
                                   const radio::BandConfig &band,
                                   const SumRateScenario &scenario) {
    for (auto [row, col] : scenario.user_cells)
        if (row < 0 || row >= scene.rows || col < 0 || col >= scene.cols)
            throw ConfigError("sum_rate: user cell outside the scene grid");
    (void)grid;
    uint64_t seed = scenario.seed;
    auto cells = scenario.user_cells;
    return [scene, band, seed, cells](int user, int draw) {
        const auto &[row, col] = cells[size_t(user)];
        const auto &clusters = scene.cell(row, col);
        Rng rng(derive_seed(seed, {uint64_t(kStreamDraw), uint64_t(user), uint64_t(draw)}));
        Eigen::VectorXcd h = Eigen::VectorXcd::Zero(band.total_antennas());
        for (const auto &cl : clusters) {
            double psi = rng.uniform(0.0, 2.0 * M_PI);
            double amp = std::sqrt(radio::band_power(scene, cl, band));
            std::complex<double> coeff = std::polar(amp, psi);
            h += coeff * radio::steering_vector(band, cl.elevation_rad, cl.azimuth_rad);
        }
        return h;
    };
}

PredictionSet predict_all(const nn::TranslatorPair &pair, const fp::Dataset &test,
                          int batch_size) {
    if (test.pairs.empty())
        throw ConfigError("eval: test dataset contains no pairs");
    if (int(test.header.channels_i) != pair.ij.config().in_channels ||
        int(test.header.channels_j) != pair.ij.config().out_channels)
        throw ConfigError("eval: dataset channel counts do not match the checkpoint");
    if (test.header.frequency_i_hz != pair.frequency_i_hz ||
        test.header.frequency_j_hz != pair.frequency_j_hz)
        throw ConfigError("eval: dataset bands do not match the checkpoint");

    PredictionSet preds;
    const int n = int(test.pairs.size());
    preds.ij.resize(size_t(n));
    preds.ji.resize(size_t(n));
    for (int lo = 0; lo < n; lo += batch_size) {
        int hi = std::min(n, lo + batch_size);
        std::vector<int> idx(size_t(hi - lo));
        std::iota(idx.begin(), idx.end(), lo);
        nn::Tensor<float> x_i = train::make_batch(test, idx, true);
        nn::Tensor<float> x_j = train::make_batch(test, idx, false);
        nn::Tensor<float> y_j = pair.ij.forward(x_i);
        nn::Tensor<float> y_i = pair.ji.forward(x_j);
        for (int s = 0; s < hi - lo; s++) {
            preds.ij[size_t(lo + s)] = train::net_output_to_image(y_j, s);
            preds.ji[size_t(lo + s)] = train::net_output_to_image(y_i, s);
        }
    }
    return preds;
}

EvalReport score_predictions(const fp::Dataset &test, const PredictionSet &preds,
                             bool use_refine, const std::string &label) {
    if (preds.ij.size() != test.pairs.size() || preds.ji.size() != test.pairs.size())
        throw ConfigError("eval: prediction count does not match dataset");
    const auto &h = test.header;
    ChannelAccum acc_ij, acc_ji;
    for (size_t p = 0; p < test.pairs.size(); p++) {
        const fp::PairSample &sample = test.pairs[p];
        GridTensor truth_j = image_as_physical(sample.img_j, h, false, sample.stats_j);
        GridTensor pred_j = image_as_physical(preds.ij[p], h, false, sample.stats_j);
        GridTensor truth_i = image_as_physical(sample.img_i, h, true, sample.stats_i);
        GridTensor pred_i = image_as_physical(preds.ji[p], h, true, sample.stats_i);
        if (use_refine) {
            truth_j = fp::pool_pixel_blocks(truth_j, int(h.rho), int(h.varrho));
            pred_j = fp::pool_pixel_blocks(pred_j, int(h.rho), int(h.varrho));
            truth_i = fp::pool_pixel_blocks(truth_i, int(h.rho), int(h.varrho));
            pred_i = fp::pool_pixel_blocks(pred_i, int(h.rho), int(h.varrho));
        }
        acc_ij.add(pred_j, truth_j);
        acc_ji.add(pred_i, truth_i);
    }
    EvalReport report;
    report.method = label;
    report.used_refine = use_refine;
    report.dir_ij = acc_ij.result();
    report.dir_ji = acc_ji.result();
    return report;
}

EvalReport eval_pipeline(const nn::TranslatorPair &pair, const fp::Dataset &test,
                         bool use_refine, const std::string &label) {
    return score_predictions(test, predict_all(pair, test), use_refine, label);
}

EvalReport eval_linear_baseline(const fp::Dataset &test, const radio::BandConfig &band_i,
                                const radio::BandConfig &band_j) {
    if (test.pairs.empty())
        throw ConfigError("eval: test dataset contains no pairs");
    const auto &h = test.header;
    if (band_i.total_antennas() != int(h.channels_i) ||
        band_j.total_antennas() != int(h.channels_j))
        throw ConfigError("eval: band antenna counts do not match the dataset");
    ChannelAccum acc_ij, acc_ji;
    for (const fp::PairSample &sample : test.pairs) {
        GridTensor truth_i = fp::pool_pixel_blocks(
            image_as_physical(sample.img_i, h, true, sample.stats_i), int(h.rho),
            int(h.varrho));
        GridTensor truth_j = fp::pool_pixel_blocks(
            image_as_physical(sample.img_j, h, false, sample.stats_j), int(h.rho),
            int(h.varrho));
        fp::Fingerprint fp_i{truth_i, band_i, h.mode, 0, h.scenario};
        fp::Fingerprint fp_j{truth_j, band_j, h.mode, 0, h.scenario};
        acc_ij.add(linear_baseline_extrapolate(fp_i, band_i, band_j).values, truth_j);
        acc_ji.add(linear_baseline_extrapolate(fp_j, band_j, band_i).values, truth_i);
    }
    EvalReport report;
    report.method = "linear_baseline";
    report.used_refine = true;
    report.used_cycle = false;
    report.dir_ij = acc_ij.result();
    report.dir_ji = acc_ji.result();
    return report;
}

} // namespace cfx::eval
