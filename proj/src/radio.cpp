// SPDX-License-Identifier: Apache-2.0

#include "cfx/radio.hpp"
#include "cfx/rng.hpp"

#include <bit>
#include <filesystem>

namespace cfx::radio {

namespace {
constexpr uint16_t kDumpVersion = 1;
constexpr double kTwoPi = 2.0 * M_PI;

uint64_t band_key(const BandConfig &band) { return std::bit_cast<uint64_t>(band.frequency_hz); }
} // namespace

void BandConfig::validate() const {
    if (antennas_y < 1 || antennas_z < 1)
        throw ConfigError("band: antenna counts must be >= 1");
    if (!(spacing_ratio > 0.0))
        throw ConfigError("band: spacing_ratio must be > 0");
    if (!(frequency_hz > 0.0))
        throw ConfigError("band: frequency must be > 0");
}

void RegionGrid::validate() const {
    if (!(size_x_m > 0.0) || !(size_y_m > 0.0) || !(grid_dx_m > 0.0) || !(grid_dy_m > 0.0))
        throw ConfigError("grid: sizes and pitches must be > 0");
    // integer cell counts in both directions
    double nx = size_x_m / grid_dx_m, ny = size_y_m / grid_dy_m;
    if (std::abs(nx - std::lround(nx)) > 1e-9 || std::abs(ny - std::lround(ny)) > 1e-9)
        throw ConfigError("grid: region size must be an integer multiple of the grid pitch");
    if (cols() < 1 || rows() < 1)
        throw ConfigError("grid: at least one cell required");
}

void TrajectoryPlan::validate(const RegionGrid &grid) const {
    if (num_slots < 1)
        throw ConfigError("trajectory: num_slots must be >= 1");
    if (!(slot_duration_s > 0.0))
        throw ConfigError("trajectory: slot duration must be > 0");
    if (!(radius_m > 0.0) || 2.0 * radius_m > std::min(grid.grid_dx_m, grid.grid_dy_m))
        throw ConfigError("trajectory: circle must fit inside one grid cell");
}

Eigen::VectorXcd steering_vector(const BandConfig &band, double elevation_rad, double azimuth_rad) {
    const int mz = band.antennas_z, my = band.antennas_y;
    const double xi = band.spacing_ratio;
    const double pz = -kTwoPi * xi * std::sin(elevation_rad);
    const double py = -kTwoPi * xi * std::cos(elevation_rad) * std::sin(azimuth_rad);
    Eigen::VectorXcd a(mz * my);
    for (int m = 0; m < mz; m++) {
        std::complex<double> az = std::polar(1.0, pz * m);
        for (int n = 0; n < my; n++)
            a[m * my + n] = az * std::polar(1.0, py * n);
    }
    return a;
}

Eigen::MatrixXcd beam_basis_matrix(const BandConfig &band) {
    if (std::abs(band.spacing_ratio - 0.5) > 1e-12)
        throw ConfigError("beam basis requires half-wavelength spacing (spacing_ratio = 0.5)");
    auto axis_factor = [](int m_axis) {
        Eigen::MatrixXcd f(m_axis, m_axis);
        for (int k = 1; k <= m_axis; k++) {
            // beam k (1-based) sits at direction cosine 2k/M - 1
            double u = 2.0 * k / m_axis - 1.0;
            for (int m = 1; m <= m_axis; m++)
                f(m - 1, k - 1) = std::polar(1.0, -M_PI * (m - 1) * u);
        }
        return f;
    };
    Eigen::MatrixXcd fz = axis_factor(band.antennas_z);
    Eigen::MatrixXcd fy = axis_factor(band.antennas_y);
    const int mz = band.antennas_z, my = band.antennas_y;
    Eigen::MatrixXcd a(mz * my, mz * my);
    for (int r1 = 0; r1 < mz; r1++)
        for (int r2 = 0; r2 < my; r2++)
            for (int c1 = 0; c1 < mz; c1++)
                for (int c2 = 0; c2 < my; c2++)
                    a(r1 * my + r2, c1 * my + c2) = fz(r1, c1) * fy(r2, c2);
    return a;
}

namespace {

// Direct-path bearing from the BS to a cell center.
void bearing(const PropagationScene &scene, const RegionGrid &grid, int row, int col, double &elevation,
             double &azimuth) {
    auto c = grid.cell_center(row, col);
    double dx = c[0] - scene.bs_position[0];
    double dy = c[1] - scene.bs_position[1];
    double dz = scene.bs_position[2] - scene.ut_height_m; // positive: BS above user
    double horiz = std::hypot(dx, dy);
    elevation = std::atan2(dz, horiz);
    azimuth = std::atan2(dy, dx);
}

} // namespace

PropagationScene generate_scene(const RegionGrid &grid, Scenario kind, uint64_t seed,
                                const SceneParams &params) {
    grid.validate();
    if (params.clusters_min < 1 || params.clusters_max < params.clusters_min)
        throw ConfigError("scene: invalid cluster count range");

    PropagationScene scene;
    scene.kind = kind;
    scene.rng_seed = seed;
    scene.rows = grid.rows();
    scene.cols = grid.cols();
    scene.ut_height_m = grid.ut_height_m;
    scene.reference_frequency_hz = params.reference_frequency_hz;
    scene.attenuation_exponent = params.attenuation_exponent;

    // BS placement: behind the x = 0 edge, far enough back that every
    // BS->cell bearing stays inside the elevation sector. Drawn from the
    // seed unless the grid pins a position.
    scene.bs_position = grid.bs_position;
    if (std::isnan(scene.bs_position[0]) || std::isnan(scene.bs_position[1])) {
        Rng bs_rng(derive_seed(seed, {kStreamBs}));
        double dz = scene.bs_position[2] - grid.ut_height_m;
        double d_lo = 4.0;
        if (params.elevation_max_rad < M_PI / 2.0)
            d_lo = std::max(d_lo, dz / std::tan(params.elevation_max_rad) - 0.5 * grid.grid_dx_m + 0.25);
        scene.bs_position[0] = -bs_rng.uniform(d_lo, d_lo + 2.0);
        scene.bs_position[1] = grid.size_y_m * bs_rng.uniform(0.25, 0.75);
    }

    const double scattered_total =
        (kind == Scenario::kLos) ? 1.0 / (1.0 + params.rice_factor) : 1.0;

    scene.cells.resize(size_t(scene.rows) * scene.cols);
    for (int r = 0; r < scene.rows; r++) {
        for (int c = 0; c < scene.cols; c++) {
            Rng rng(derive_seed(seed, {kStreamCell, uint64_t(r), uint64_t(c)}));
            int k = rng.uniform_int(params.clusters_min, params.clusters_max);
            std::vector<Cluster> cell(k);
            double wsum = 0.0;
            for (auto &cl : cell) {
                cl.elevation_rad = rng.uniform(params.elevation_min_rad, params.elevation_max_rad);
                cl.azimuth_rad = rng.uniform(params.azimuth_min_rad, params.azimuth_max_rad);
                cl.base_power = rng.uniform(0.2, 1.0);
                cl.doppler_hz = rng.uniform(-params.doppler_max_hz, params.doppler_max_hz);
                wsum += cl.base_power;
            }
            for (auto &cl : cell)
                cl.base_power *= scattered_total / wsum;
            if (kind == Scenario::kLos) {
                Cluster los;
                los.direct = true;
                bearing(scene, grid, r, c, los.elevation_rad, los.azimuth_rad);
                los.base_power = params.rice_factor / (1.0 + params.rice_factor);
                los.doppler_hz = rng.uniform(-params.doppler_max_hz, params.doppler_max_hz);
                if (los.elevation_rad < params.elevation_min_rad ||
                    los.elevation_rad > params.elevation_max_rad ||
                    los.azimuth_rad < params.azimuth_min_rad || los.azimuth_rad > params.azimuth_max_rad)
                    throw ConfigError("scene: direct-path bearing falls outside the angle sector; "
                                      "widen the sector or move the BS");
                cell.insert(cell.begin(), los);
            }
            scene.cells[size_t(r) * scene.cols + c] = std::move(cell);
        }
    }
    return scene;
}

double band_power(const PropagationScene &scene, const Cluster &cl, const BandConfig &band) {
    return cl.base_power *
           std::pow(scene.reference_frequency_hz / band.frequency_hz, scene.attenuation_exponent);
}

void sample_cell_channels(const PropagationScene &scene, const RegionGrid &grid, const BandConfig &band,
                          const TrajectoryPlan &plan, int row, int col, std::complex<float> *out) {
    band.validate();
    plan.validate(grid);
    if (scene.rows != grid.rows() || scene.cols != grid.cols())
        throw ConfigError("scene/grid mismatch: cell counts differ");

    const int t_total = plan.num_slots;
    const int m_total = band.total_antennas();
    const auto &clusters = scene.cell(row, col);

    Rng phase_rng(
        derive_seed(scene.rng_seed, {kStreamPhase, uint64_t(row), uint64_t(col), band_key(band)}));

    std::vector<std::complex<double>> acc(size_t(t_total) * m_total, {0.0, 0.0});
    Eigen::VectorXcd weighted(m_total);
    for (const auto &cl : clusters) {
        double psi = phase_rng.uniform(0.0, kTwoPi);
        double amp = std::sqrt(band_power(scene, cl, band));
        weighted = amp * steering_vector(band, cl.elevation_rad, cl.azimuth_rad);
        for (int t = 0; t < t_total; t++) {
            std::complex<double> rot =
                std::polar(1.0, psi + kTwoPi * cl.doppler_hz * plan.slot_duration_s * t);
            Eigen::Map<Eigen::VectorXcd> slot(acc.data() + size_t(t) * m_total, m_total);
            slot.noalias() += rot * weighted;
        }
    }
    for (size_t i = 0; i < acc.size(); i++)
        out[i] = std::complex<float>(float(acc[i].real()), float(acc[i].imag()));
}

ChannelRealization sample_channels(const PropagationScene &scene, const RegionGrid &grid,
                                   const BandConfig &band, const TrajectoryPlan &plan) {
    ChannelRealization re;
    re.rows = grid.rows();
    re.cols = grid.cols();
    re.num_slots = plan.num_slots;
    re.num_antennas = band.total_antennas();
    re.frequency_hz = band.frequency_hz;
    re.scenario = scene.kind;
    re.data.resize(size_t(re.rows) * re.cols * re.num_slots * re.num_antennas);

#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int r = 0; r < re.rows; r++)
        for (int c = 0; c < re.cols; c++)
            sample_cell_channels(scene, grid, band, plan, r, c, re.data.data() + re.cell_offset(r, c));
    return re;
}

Eigen::MatrixXcd ensemble_covariance(const PropagationScene &scene, const RegionGrid &grid,
                                     const BandConfig &band, int row, int col) {
    const int m = band.total_antennas();
    Eigen::MatrixXcd r_mat = Eigen::MatrixXcd::Zero(m, m);
    for (const auto &cl : scene.cell(row, col)) {
        Eigen::VectorXcd a = steering_vector(band, cl.elevation_rad, cl.azimuth_rad);
        r_mat.selfadjointView<Eigen::Lower>().rankUpdate(a, band_power(scene, cl, band));
    }
    (void)grid;
    return r_mat.selfadjointView<Eigen::Lower>();
}

void export_channel_dump(const std::string &path, const ChannelRealization &re) {
    FileWriter w(path);
    w.bytes("CFCH", 4);
    w.u16(kDumpVersion);
    w.u32(uint32_t(re.rows));
    w.u32(uint32_t(re.cols));
    w.u32(uint32_t(re.num_slots));
    w.u32(uint32_t(re.num_antennas));
    w.f64(re.frequency_hz);
    w.u8(uint8_t(re.scenario));
    for (const auto &v : re.data) {
        w.f32(v.real());
        w.f32(v.imag());
    }
    w.close();
}

ChannelRealization import_channel_dump(const std::string &path) {
    constexpr size_t kHeaderBytes = 4 + 2 + 4 * 4 + 8 + 1;
    uintmax_t file_size = 0;
    try {
        file_size = std::filesystem::file_size(path);
    } catch (const std::filesystem::filesystem_error &e) {
        throw IoError("cannot stat channel dump: " + std::string(e.what()));
    }

    FileReader rd(path);
    char magic[4];
    rd.bytes(magic, 4);
    if (std::memcmp(magic, "CFCH", 4) != 0)
        throw IoError("malformed header: bad magic in " + path);
    uint16_t version = rd.u16();
    if (version != kDumpVersion)
        throw IoError("malformed header: unsupported version " + std::to_string(version));

    ChannelRealization re;
    re.rows = int(rd.u32());
    re.cols = int(rd.u32());
    re.num_slots = int(rd.u32());
    re.num_antennas = int(rd.u32());
    re.frequency_hz = rd.f64();
    uint8_t flag = rd.u8();
    if (re.rows < 1 || re.cols < 1 || re.num_slots < 1 || re.num_antennas < 1)
        throw IoError("malformed header: non-positive dimension in " + path);
    if (flag > 1)
        throw IoError("malformed header: unknown scenario flag in " + path);
    re.scenario = Scenario(flag);

    size_t count = size_t(re.rows) * re.cols * re.num_slots * re.num_antennas;
    size_t payload = size_t(file_size) - std::min<size_t>(kHeaderBytes, size_t(file_size));
    if (payload != count * 8) {
        if (payload % 8 == 0)
            throw IoError("dimension mismatch: header declares " + std::to_string(count) +
                          " complex entries, payload holds " + std::to_string(payload / 8));
        throw IoError("malformed payload: size is not a whole number of complex entries in " + path);
    }

    re.data.resize(count);
    for (auto &v : re.data) {
        float x = rd.f32(), y = rd.f32();
        if (!std::isfinite(x) || !std::isfinite(y))
            throw IoError("non-finite values in channel dump " + path);
        v = {x, y};
    }
    return re;
}

} // namespace cfx::radio
