// SPDX-License-Identifier: Apache-2.0

#include "cfx/fingerprint.hpp"

#include <algorithm>
#include <cmath>

namespace cfx::fp {

namespace {
constexpr uint16_t kDatasetVersion = 1;

void check_hermitian(const Eigen::MatrixXcd &r_mat) {
    double scale = std::max(1.0, r_mat.cwiseAbs().maxCoeff());
    double dev = (r_mat - r_mat.adjoint()).cwiseAbs().maxCoeff();
    if (dev > 1e-6 * scale)
        throw NumericalError("covariance is not Hermitian within tolerance");
}

std::vector<double> beam_pas_with_basis(const Eigen::MatrixXcd &r_mat, const Eigen::MatrixXcd &basis,
                                        PasMode mode) {
    const int m = int(r_mat.rows());
    if (r_mat.cols() != m)
        throw ConfigError("beam_pas: covariance must be square");
    check_hermitian(r_mat);
    double trace = r_mat.real().trace();
    double neg_tol = 1e-6 * std::max(trace, 0.0);

    std::vector<double> pas(m);
    if (mode == PasMode::kEvdSorted) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r_mat, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw NumericalError("eigendecomposition failed");
        // ascending from the solver; store descending
        for (int k = 0; k < m; k++)
            pas[k] = es.eigenvalues()(m - 1 - k);
    } else {
        // diag(A^H R A)/M, column by column on the cached basis
        Eigen::MatrixXcd rb = r_mat * basis;
        for (int k = 0; k < m; k++)
            pas[k] = basis.col(k).dot(rb.col(k)).real() / m;
    }
    for (auto &p : pas) {
        if (p < -neg_tol)
            throw NumericalError("beam PAS has a negative component beyond tolerance");
        p = std::max(p, 0.0);
    }
    return pas;
}

Eigen::MatrixXcd covariance_of_slots(const std::complex<float> *slots, int t_total, int m_total) {
    Eigen::MatrixXcd h(m_total, t_total);
    for (int t = 0; t < t_total; t++)
        for (int m = 0; m < m_total; m++) {
            std::complex<float> v = slots[size_t(t) * m_total + m];
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw NumericalError("non-finite channel entry in covariance input");
            h(m, t) = v;
        }
    Eigen::MatrixXcd r_mat(m_total, m_total);
    r_mat.noalias() = h * h.adjoint();
    r_mat /= double(t_total);
    return r_mat;
}

} // namespace

Eigen::MatrixXcd sample_covariance(const radio::ChannelRealization &realization, int row, int col,
                                   const radio::BandConfig &band) {
    if (band.total_antennas() != realization.num_antennas)
        throw ConfigError("sample_covariance: band antenna count does not match realization");
    if (row < 0 || row >= realization.rows || col < 0 || col >= realization.cols)
        throw ConfigError("sample_covariance: cell index out of range");
    return covariance_of_slots(realization.slot(row, col, 0), realization.num_slots,
                               realization.num_antennas);
}

std::vector<double> beam_pas(const Eigen::MatrixXcd &r_mat, const radio::BandConfig &band, PasMode mode) {
    if (band.total_antennas() != r_mat.rows())
        throw ConfigError("beam_pas: covariance size does not match band");
    Eigen::MatrixXcd basis;
    if (mode == PasMode::kDftDiag)
        basis = radio::beam_basis_matrix(band);
    return beam_pas_with_basis(r_mat, basis, mode);
}

Fingerprint assemble_fingerprint(const radio::ChannelRealization &realization,
                                 const radio::RegionGrid &grid, const radio::BandConfig &band,
                                 PasMode mode) {
    if (realization.rows != grid.rows() || realization.cols != grid.cols())
        throw ConfigError("assemble_fingerprint: realization does not cover the grid");
    if (band.total_antennas() != realization.num_antennas)
        throw ConfigError("assemble_fingerprint: band antenna count does not match realization");

    const int m = band.total_antennas();
    Fingerprint fp;
    fp.values = GridTensor(realization.rows, realization.cols, m);
    fp.band = band;
    fp.mode = mode;
    fp.scenario = realization.scenario;

    Eigen::MatrixXcd basis;
    if (mode == PasMode::kDftDiag)
        basis = radio::beam_basis_matrix(band);

#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int r = 0; r < realization.rows; r++)
        for (int c = 0; c < realization.cols; c++) {
            auto cov = covariance_of_slots(realization.slot(r, c, 0), realization.num_slots, m);
            auto pas = beam_pas_with_basis(cov, basis, mode);
            std::copy(pas.begin(), pas.end(), fp.values.cell(r, c));
        }
    return fp;
}

Fingerprint assemble_fingerprint_from_scene(const radio::PropagationScene &scene,
                                            const radio::RegionGrid &grid, const radio::BandConfig &band,
                                            const radio::TrajectoryPlan &plan, PasMode mode) {
    const int m = band.total_antennas();
    Fingerprint fp;
    fp.values = GridTensor(grid.rows(), grid.cols(), m);
    fp.band = band;
    fp.mode = mode;
    fp.scene_seed = scene.rng_seed;
    fp.scenario = scene.kind;

    Eigen::MatrixXcd basis;
    if (mode == PasMode::kDftDiag)
        basis = radio::beam_basis_matrix(band);

#pragma omp parallel
    {
        std::vector<std::complex<float>> slots(size_t(plan.num_slots) * m);
#pragma omp for collapse(2) schedule(dynamic)
        for (int r = 0; r < fp.values.rows; r++)
            for (int c = 0; c < fp.values.cols; c++) {
                radio::sample_cell_channels(scene, grid, band, plan, r, c, slots.data());
                auto cov = covariance_of_slots(slots.data(), plan.num_slots, m);
                auto pas = beam_pas_with_basis(cov, basis, mode);
                std::copy(pas.begin(), pas.end(), fp.values.cell(r, c));
            }
    }
    return fp;
}

GridTensor replicate_grid_cells(const GridTensor &g, int rho, int varrho) {
    GridTensor out(g.rows * varrho, g.cols * rho, g.channels);
    for (int r = 0; r < out.rows; r++)
        for (int c = 0; c < out.cols; c++) {
            const double *src = g.cell(r / varrho, c / rho);
            std::copy(src, src + g.channels, out.cell(r, c));
        }
    return out;
}

GridTensor pool_pixel_blocks(const GridTensor &img, int rho, int varrho) {
    GridTensor out(img.rows / varrho, img.cols / rho, img.channels);
    const double inv = 1.0 / (double(rho) * varrho);
    for (int r = 0; r < out.rows; r++)
        for (int c = 0; c < out.cols; c++)
            for (int ch = 0; ch < img.channels; ch++) {
                double acc = 0.0;
                for (int dr = 0; dr < varrho; dr++)
                    for (int dc = 0; dc < rho; dc++)
                        acc += img.at(r * varrho + dr, c * rho + dc, ch);
                out.at(r, c, ch) = acc * inv;
            }
    return out;
}

FingerprintImage grid_to_pixel(const Fingerprint &fp, int rho, int varrho) {
    if (rho < 1 || varrho < 1)
        throw ConfigError("grid_to_pixel: replication factors must be >= 1");
    FingerprintImage img;
    img.rho = rho;
    img.varrho = varrho;
    img.values = replicate_grid_cells(fp.values, rho, varrho);
    return img;
}

Fingerprint pixel_to_grid(const FingerprintImage &img, const radio::BandConfig &band, PasMode mode) {
    if (img.rho < 1 || img.varrho < 1)
        throw ConfigError("pixel_to_grid: replication factors must be >= 1");
    if (img.values.rows % img.varrho != 0 || img.values.cols % img.rho != 0)
        throw ConfigError("pixel_to_grid: image dimensions not divisible by replication factors");
    Fingerprint fp;
    fp.values = pool_pixel_blocks(img.values, img.rho, img.varrho);
    fp.band = band;
    fp.mode = mode;
    return fp;
}

NormalizationStats compute_stats(const GridTensor &t) {
    NormalizationStats st;
    st.min_v.assign(t.channels, std::numeric_limits<double>::infinity());
    st.max_v.assign(t.channels, -std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < t.count(); i++) {
        double v = t.v[i];
        if (!std::isfinite(v))
            throw NumericalError("normalize: non-finite input");
        int ch = int(i % t.channels);
        st.min_v[ch] = std::min(st.min_v[ch], v);
        st.max_v[ch] = std::max(st.max_v[ch], v);
    }
    return st;
}

void accumulate_stats(NormalizationStats &stats, const GridTensor &t) {
    if (stats.channels() == 0) {
        stats = compute_stats(t);
        return;
    }
    if (stats.channels() != t.channels)
        throw ConfigError("normalize: stats channel count mismatch");
    NormalizationStats own = compute_stats(t);
    for (int ch = 0; ch < t.channels; ch++) {
        stats.min_v[size_t(ch)] = std::min(stats.min_v[size_t(ch)], own.min_v[size_t(ch)]);
        stats.max_v[size_t(ch)] = std::max(stats.max_v[size_t(ch)], own.max_v[size_t(ch)]);
    }
}

GridTensor normalize_with(const GridTensor &t, const NormalizationStats &stats) {
    if (stats.channels() != t.channels)
        throw ConfigError("normalize: stats channel count mismatch");
    GridTensor out = t;
    for (size_t i = 0; i < out.count(); i++) {
        int ch = int(i % t.channels);
        double range = stats.max_v[ch] - stats.min_v[ch];
        out.v[i] = range > 0.0 ? (t.v[i] - stats.min_v[ch]) / range : 0.0;
    }
    return out;
}

std::pair<GridTensor, NormalizationStats> normalize(const GridTensor &t) {
    NormalizationStats st = compute_stats(t);
    return {normalize_with(t, st), st};
}

GridTensor denormalize(const GridTensor &t, const NormalizationStats &stats) {
    if (stats.channels() != t.channels)
        throw ConfigError("denormalize: stats channel count mismatch");
    GridTensor out = t;
    for (size_t i = 0; i < out.count(); i++) {
        int ch = int(i % t.channels);
        double range = stats.max_v[ch] - stats.min_v[ch];
        out.v[i] = range > 0.0 ? t.v[i] * range + stats.min_v[ch] : stats.min_v[ch];
    }
    return out;
}

namespace {

void write_stats(FileWriter &w, const NormalizationStats &st) {
    for (double v : st.min_v)
        w.f64(v);
    for (double v : st.max_v)
        w.f64(v);
}

NormalizationStats read_stats(FileReader &r, int channels) {
    NormalizationStats st;
    st.min_v.resize(channels);
    st.max_v.resize(channels);
    for (auto &v : st.min_v)
        v = r.f64();
    for (auto &v : st.max_v)
        v = r.f64();
    return st;
}

} // namespace

void write_dataset(const std::string &path, const Dataset &ds) {
    const auto &h = ds.header;
    if (ds.pairs.size() != h.pair_count)
        throw ConfigError("write_dataset: header pair count does not match data");
    FileWriter w(path);
    w.bytes("CFDS", 4);
    w.u16(kDatasetVersion);
    w.u32(h.pair_count);
    w.u32(h.rows);
    w.u32(h.cols);
    w.u32(h.rho);
    w.u32(h.varrho);
    w.u32(h.channels_i);
    w.u32(h.channels_j);
    w.f64(h.frequency_i_hz);
    w.f64(h.frequency_j_hz);
    w.u8(uint8_t(h.scenario));
    w.u8(uint8_t(h.mode));

    size_t n_i = size_t(h.image_rows()) * h.image_cols() * h.channels_i;
    size_t n_j = size_t(h.image_rows()) * h.image_cols() * h.channels_j;
    for (const auto &p : ds.pairs) {
        if (p.img_i.size() != n_i || p.img_j.size() != n_j)
            throw ConfigError("write_dataset: pair tensor size mismatch");
        w.f32_array(p.img_i.data(), n_i);
        w.f32_array(p.img_j.data(), n_j);
        write_stats(w, p.stats_i);
        write_stats(w, p.stats_j);
    }
    w.close();
}

Dataset read_dataset(const std::string &path) {
    FileReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "CFDS", 4) != 0)
        throw IoError("malformed dataset header: bad magic in " + path);
    uint16_t version = r.u16();
    if (version != kDatasetVersion)
        throw IoError("malformed dataset header: unsupported version " + std::to_string(version));

    Dataset ds;
    auto &h = ds.header;
    h.pair_count = r.u32();
    h.rows = r.u32();
    h.cols = r.u32();
    h.rho = r.u32();
    h.varrho = r.u32();
    h.channels_i = r.u32();
    h.channels_j = r.u32();
    h.frequency_i_hz = r.f64();
    h.frequency_j_hz = r.f64();
    uint8_t scen = r.u8(), mode = r.u8();
    if (h.rows < 1 || h.cols < 1 || h.rho < 1 || h.varrho < 1 || h.channels_i < 1 || h.channels_j < 1)
        throw IoError("malformed dataset header: non-positive dimension in " + path);
    if (scen > 1 || mode > 1)
        throw IoError("malformed dataset header: unknown flag in " + path);
    h.scenario = radio::Scenario(scen);
    h.mode = PasMode(mode);

    size_t n_i = size_t(h.image_rows()) * h.image_cols() * h.channels_i;
    size_t n_j = size_t(h.image_rows()) * h.image_cols() * h.channels_j;
    ds.pairs.resize(h.pair_count);
    for (auto &p : ds.pairs) {
        p.img_i.resize(n_i);
        p.img_j.resize(n_j);
        r.f32_array(p.img_i.data(), n_i);
        r.f32_array(p.img_j.data(), n_j);
        p.stats_i = read_stats(r, int(h.channels_i));
        p.stats_j = read_stats(r, int(h.channels_j));
    }
    return ds;
}

GridTensor image_to_grid_tensor(const std::vector<float> &img, int rows, int cols, int channels) {
    if (img.size() != size_t(rows) * cols * channels)
        throw ConfigError("image_to_grid_tensor: size mismatch");
    GridTensor t(rows, cols, channels);
    for (size_t i = 0; i < img.size(); i++)
        t.v[i] = double(img[i]);
    return t;
}

} // namespace cfx::fp
