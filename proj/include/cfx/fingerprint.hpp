// SPDX-License-Identifier: Apache-2.0
//
// Channel fingerprints: per-cell beam-domain power-angle spectra over the
// region grid, grid/pixel conversion, max-min normalization, and the paired
// fingerprint dataset format used for translator training.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cfx/radio.hpp"

namespace cfx::fp {

enum class PasMode : uint8_t {
    kEvdSorted = 0, // eigenvalues sorted descending (default dataset construction)
    kDftDiag = 1,   // diag(A^H R A)/M, keeps beam-index meaning
};

// Dense (rows, cols, channels) tensor in row-major (row, col, channel) order.
// Doubles throughout: grid/pixel round trips must hold to 1e-12.
struct GridTensor {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<double> v;

    GridTensor() = default;
    GridTensor(int r, int c, int ch) : rows(r), cols(c), channels(ch), v(size_t(r) * c * ch, 0.0) {}
    double &at(int r, int c, int ch) { return v[(size_t(r) * cols + c) * channels + ch]; }
    double at(int r, int c, int ch) const { return v[(size_t(r) * cols + c) * channels + ch]; }
    // Start of cell (r, c)'s channel vector.
    double *cell(int r, int c) { return v.data() + (size_t(r) * cols + c) * channels; }
    const double *cell(int r, int c) const { return v.data() + (size_t(r) * cols + c) * channels; }
    size_t count() const { return v.size(); }
};

// Grid-indexed fingerprint: cell (row, col) holds its length-M beam PAS.
struct Fingerprint {
    GridTensor values; // (L_y, L_x, M)
    radio::BandConfig band;
    PasMode mode = PasMode::kEvdSorted;
    uint64_t scene_seed = 0;
    radio::Scenario scenario = radio::Scenario::kLos;
};

// Pixel-indexed fingerprint; each grid cell is replicated over a
// varrho x rho block of pixels.
struct FingerprintImage {
    GridTensor values; // (varrho*L_y, rho*L_x, M)
    int rho = 1;       // horizontal replication
    int varrho = 1;    // vertical replication
};

// Per-beam-channel max-min range used for [0,1] scaling.
struct NormalizationStats {
    std::vector<double> min_v, max_v;
    int channels() const { return int(min_v.size()); }
};

// Sample covariance (1/T) sum_t h(t) h(t)^H of one cell; Hermitian PSD.
Eigen::MatrixXcd sample_covariance(const radio::ChannelRealization &realization, int row, int col,
                                   const radio::BandConfig &band);

// Beam-domain PAS of a covariance. evd_sorted: eigenvalues descending.
// dft_diag: diag(A^H R A)/M with A the beam basis, so a covariance that is
// diagonal in the beam basis maps to exactly its beam powers.
std::vector<double> beam_pas(const Eigen::MatrixXcd &r_mat, const radio::BandConfig &band, PasMode mode);

// Per-cell PAS assembly over the whole grid: out[row, col, :] =
// beam_pas(sample_covariance(...)).
Fingerprint assemble_fingerprint(const radio::ChannelRealization &realization,
                                 const radio::RegionGrid &grid, const radio::BandConfig &band,
                                 PasMode mode);

// Fused synthesize-and-assemble path: samples each cell's slots, forms the
// covariance, and reduces to the PAS without materializing the whole
// realization. Produces values identical to
// assemble_fingerprint(sample_channels(...)).
Fingerprint assemble_fingerprint_from_scene(const radio::PropagationScene &scene,
                                            const radio::RegionGrid &grid, const radio::BandConfig &band,
                                            const radio::TrajectoryPlan &plan, PasMode mode);

// Replicates each grid cell into a varrho x rho pixel block.
FingerprintImage grid_to_pixel(const Fingerprint &fp, int rho, int varrho);

// Average-pools each varrho x rho pixel block back to its grid cell; exact
// inverse of grid_to_pixel (the refining scheme).
Fingerprint pixel_to_grid(const FingerprintImage &img, const radio::BandConfig &band, PasMode mode);

// Tensor-level cores of the two conversions above.
GridTensor replicate_grid_cells(const GridTensor &g, int rho, int varrho);
GridTensor pool_pixel_blocks(const GridTensor &img, int rho, int varrho);

// Max-min normalization to [0,1] per beam channel. Degenerate channels
// (max == min) map to 0 and are restored exactly from the stats.
NormalizationStats compute_stats(const GridTensor &t);
// Widens stats in place to cover another tensor (dataset-level ranges).
void accumulate_stats(NormalizationStats &stats, const GridTensor &t);
GridTensor normalize_with(const GridTensor &t, const NormalizationStats &stats);
std::pair<GridTensor, NormalizationStats> normalize(const GridTensor &t);
GridTensor denormalize(const GridTensor &t, const NormalizationStats &stats);

// One training example: the same environment seen by both bands, already
// grid-to-pixel converted and normalized to [0,1], stored as f32 in
// (row, col, channel) order.
struct PairSample {
    std::vector<float> img_i, img_j;
    NormalizationStats stats_i, stats_j;
};

struct DatasetHeader {
    uint32_t pair_count = 0;
    uint32_t rows = 0, cols = 0; // L_y, L_x
    uint32_t rho = 2, varrho = 2;
    uint32_t channels_i = 0, channels_j = 0; // M_i, M_j
    double frequency_i_hz = 0.0, frequency_j_hz = 0.0;
    radio::Scenario scenario = radio::Scenario::kLos;
    PasMode mode = PasMode::kEvdSorted;

    int image_rows() const { return int(varrho * rows); }
    int image_cols() const { return int(rho * cols); }
};

struct Dataset {
    DatasetHeader header;
    std::vector<PairSample> pairs;
};

// Fingerprint dataset format "CFDS": little-endian, versioned header, per
// pair two f32 image tensors plus both bands' normalization stats.
void write_dataset(const std::string &path, const Dataset &ds);
Dataset read_dataset(const std::string &path);

// f32 image helpers shared by training and evaluation.
GridTensor image_to_grid_tensor(const std::vector<float> &img, int rows, int cols, int channels);

} // namespace cfx::fp
