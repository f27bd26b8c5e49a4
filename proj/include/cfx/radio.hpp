// SPDX-License-Identifier: Apache-2.0
//
// Scene geometry and multi-band channel synthesis over a gridded region:
// planar-array steering vectors, the DFT beam basis, a seeded geometry-based
// multipath generator, per-slot channel sampling, and the channel dump format.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "cfx/common.hpp"

namespace cfx::radio {

enum class Scenario : uint8_t { kLos = 0, kNlos = 1 };

// One carrier with its uniform planar array. The array sits in the y-z plane;
// element (m', m'') has index (m'-1)*antennas_y + m''.
struct BandConfig {
    double frequency_hz = 2e9;
    int antennas_z = 8;
    int antennas_y = 8;
    double spacing_ratio = 0.5; // element spacing over wavelength

    int total_antennas() const { return antennas_z * antennas_y; }
    void validate() const;
};

// Gridded target region. Cell (row, col) covers
// [col*dx, (col+1)*dx) x [row*dy, (row+1)*dy) with the user at the center.
// bs_position x/y may be NaN, meaning "draw during scene generation".
struct RegionGrid {
    double size_x_m = 32.0;
    double size_y_m = 32.0;
    double grid_dx_m = 2.0;
    double grid_dy_m = 2.0;
    std::array<double, 3> bs_position = {std::nan(""), std::nan(""), 10.0};
    double ut_height_m = 1.5;

    int cols() const { return int(std::lround(size_x_m / grid_dx_m)); }
    int rows() const { return int(std::lround(size_y_m / grid_dy_m)); }
    int cell_count() const { return rows() * cols(); }
    // Center of cell (row, col) in region coordinates.
    std::array<double, 2> cell_center(int row, int col) const {
        return {(col + 0.5) * grid_dx_m, (row + 0.5) * grid_dy_m};
    }
    void validate() const;
};

// Per-cell user measurement trajectory. The circle is short enough to treat
// the user as static at the cell center; motion only drives per-path Doppler.
struct TrajectoryPlan {
    int num_slots = 364;
    double radius_m = 0.5;
    double slot_duration_s = 1e-3;

    void validate(const RegionGrid &grid) const;
};

// One propagation path shared by all bands of a scene.
struct Cluster {
    double elevation_rad = 0.0;
    double azimuth_rad = 0.0;
    double base_power = 0.0; // linear, at the reference frequency
    double doppler_hz = 0.0;
    bool direct = false; // true for the LOS path
};

// Tunables of the surrogate scene generator.
struct SceneParams {
    double elevation_min_rad = -M_PI / 3.0;
    double elevation_max_rad = M_PI / 3.0;
    double azimuth_min_rad = -M_PI / 2.0;
    double azimuth_max_rad = M_PI / 2.0;
    int clusters_min = 3;
    int clusters_max = 12;
    double rice_factor = 3.0;   // LOS direct-path power over total scattered power
    double doppler_max_hz = 15.0;
    double attenuation_exponent = 2.0; // per-band power scale (f_ref/f)^eta
    double reference_frequency_hz = 2e9;
};

// Shared scatterer geometry of one environment realization. Angles and power
// profiles are common to all bands; only phases (and the attenuation scale)
// are band specific.
struct PropagationScene {
    Scenario kind = Scenario::kLos;
    uint64_t rng_seed = 0;
    int rows = 0;
    int cols = 0;
    std::array<double, 3> bs_position = {0.0, 0.0, 10.0};
    double ut_height_m = 1.5;
    double reference_frequency_hz = 2e9;
    double attenuation_exponent = 2.0;
    std::vector<std::vector<Cluster>> cells; // rows*cols entries, row-major

    const std::vector<Cluster> &cell(int row, int col) const { return cells[size_t(row) * cols + col]; }
};

// Per-cell, per-slot channel vectors for one band, stored as complex64 in
// row-major (row, col, slot, antenna) order.
struct ChannelRealization {
    int rows = 0;
    int cols = 0;
    int num_slots = 0;
    int num_antennas = 0;
    double frequency_hz = 0.0;
    Scenario scenario = Scenario::kLos;
    std::vector<std::complex<float>> data;

    size_t cell_offset(int row, int col) const {
        return (size_t(row) * cols + col) * size_t(num_slots) * num_antennas;
    }
    const std::complex<float> *slot(int row, int col, int t) const {
        return data.data() + cell_offset(row, col) + size_t(t) * num_antennas;
    }
    std::complex<float> *slot(int row, int col, int t) {
        return data.data() + cell_offset(row, col) + size_t(t) * num_antennas;
    }
};

// Steering vector a_z(theta) kron a_y(theta, phi); every entry unit modulus.
Eigen::VectorXcd steering_vector(const BandConfig &band, double elevation_rad, double azimuth_rad);

// DFT beam basis A with A A^H = M * I. Column (k', k'') points at
// sin(theta) = 2k'/M_z - 1, cos(theta)sin(phi) = 2k''/M_y - 1 (1-based k).
// Only valid at half-wavelength spacing; rejects other spacing ratios.
Eigen::MatrixXcd beam_basis_matrix(const BandConfig &band);

// Draws the shared multipath geometry for every grid cell. Deterministic
// under (grid, kind, seed, params). LOS scenes put one deterministic direct
// path per cell on the BS->cell bearing, carrying rice/(1+rice) of the power.
PropagationScene generate_scene(const RegionGrid &grid, Scenario kind, uint64_t seed,
                                const SceneParams &params = {});

// Per-band power of a cluster after attenuation scaling.
double band_power(const PropagationScene &scene, const Cluster &cl, const BandConfig &band);

// Samples T slots for a single cell into out[t*M + m]; out must hold T*M
// entries. h(t) = sum_k sqrt(P_k) e^{j(psi_k + 2 pi nu_k t dt)} a(theta_k, phi_k)
// with psi_k drawn from a per-(cell, band) stream.
void sample_cell_channels(const PropagationScene &scene, const RegionGrid &grid, const BandConfig &band,
                          const TrajectoryPlan &plan, int row, int col, std::complex<float> *out);

// Whole-grid sampling; identical values to per-cell calls in any order.
ChannelRealization sample_channels(const PropagationScene &scene, const RegionGrid &grid,
                                   const BandConfig &band, const TrajectoryPlan &plan);

// Exact (ensemble) covariance sum_k P_k a_k a_k^H of one cell, the
// infinite-observation limit of the sample covariance.
Eigen::MatrixXcd ensemble_covariance(const PropagationScene &scene, const RegionGrid &grid,
                                     const BandConfig &band, int row, int col);

// Channel dump format "CFCH": little-endian, versioned header, complex64
// payload. Lossless round trip with import_channel_dump.
void export_channel_dump(const std::string &path, const ChannelRealization &realization);
ChannelRealization import_channel_dump(const std::string &path);

} // namespace cfx::radio
