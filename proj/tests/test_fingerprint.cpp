// SPDX-License-Identifier: Apache-2.0
//
// Beam-domain PAS extraction, grid/pixel reshaping, max-min normalization,
// and the fingerprint dataset format.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <complex>
#include <filesystem>
#include <numeric>

#include "cfx/common.hpp"
#include "cfx/fingerprint.hpp"
#include "cfx/radio.hpp"
#include "cfx/rng.hpp"

using namespace cfx;
using namespace cfx::fp;

namespace {

Eigen::MatrixXcd random_unitary(int n, uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXcd g(n, n);
    for (int r = 0; r < n; r++)
        for (int c = 0; c < n; c++)
            g(r, c) = std::complex<double>(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    return qr.householderQ();
}

std::filesystem::path temp_file(const char *name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("sample covariance matches the brute-force slot average") {
    radio::ChannelRealization re;
    re.rows = re.cols = 1;
    re.num_slots = 7;
    re.num_antennas = 3;
    Rng rng(3);
    re.data.resize(size_t(7) * 3);
    for (auto &v : re.data)
        v = std::complex<float>(float(rng.normal()), float(rng.normal()));

    radio::BandConfig band{2e9, 3, 1, 0.5};
    Eigen::MatrixXcd got = sample_covariance(re, 0, 0, band);

    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(3, 3);
    for (int t = 0; t < 7; t++) {
        Eigen::Vector3cd h;
        for (int m = 0; m < 3; m++)
            h[m] = std::complex<double>(re.data[size_t(t) * 3 + m]);
        want += h * h.adjoint();
    }
    want /= 7.0;
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(sample_covariance(re, 1, 0, band), ConfigError);
}

TEST_CASE("sorted-eigenvalue PAS recovers a known spectrum in descending order") {
    const int m = 4;
    Eigen::VectorXd lam(m);
    lam << 0.0, 0.5, 1.0, 5.0; // ascending on purpose
    Eigen::MatrixXcd q = random_unitary(m, 8);
    Eigen::MatrixXcd r_mat = q * lam.asDiagonal() * q.adjoint();

    radio::BandConfig band{2e9, 2, 2, 0.5};
    auto pas = beam_pas(r_mat, band, PasMode::kEvdSorted);
    REQUIRE(pas.size() == size_t(m));
    CHECK(pas[0] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(pas[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pas[2] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(pas[3] >= 0.0); // tiny negative eigensolver output clamps to zero
    CHECK(pas[3] < 1e-9);
}

TEST_CASE("beam-diagonal PAS maps a single beam covariance to one hot beam") {
    radio::BandConfig band{2e9, 2, 2, 0.5};
    Eigen::MatrixXcd a = radio::beam_basis_matrix(band);
    const int m = 4;
    for (int k = 0; k < m; k++) {
        Eigen::MatrixXcd r_mat = a.col(k) * a.col(k).adjoint();
        auto pas = beam_pas(r_mat, band, PasMode::kDftDiag);
        for (int l = 0; l < m; l++) {
            double want = (l == k) ? double(m) : 0.0;
            CHECK(pas[l] == doctest::Approx(want).epsilon(1e-9));
        }
        CHECK(std::accumulate(pas.begin(), pas.end(), 0.0) ==
              doctest::Approx(r_mat.real().trace()).epsilon(1e-9));
    }
}

TEST_CASE("beam-diagonal PAS matches an elementwise quadratic-form oracle") {
    radio::BandConfig band{2e9, 2, 2, 0.5};
    Eigen::MatrixXcd q = random_unitary(4, 9);
    Eigen::VectorXd lam(4);
    lam << 0.1, 0.4, 0.9, 2.0;
    Eigen::MatrixXcd r_mat = q * lam.asDiagonal() * q.adjoint();
    auto pas = beam_pas(r_mat, band, PasMode::kDftDiag);

    // Independent basis construction from the axis phase definition.
    for (int kz = 1; kz <= 2; kz++)
        for (int ky = 1; ky <= 2; ky++) {
            Eigen::VectorXcd col(4);
            for (int mz = 0; mz < 2; mz++)
                for (int my = 0; my < 2; my++)
                    col[mz * 2 + my] =
                        std::polar(1.0, -M_PI * mz * (2.0 * kz / 2 - 1.0)) *
                        std::polar(1.0, -M_PI * my * (2.0 * ky / 2 - 1.0));
            double want = (col.adjoint() * r_mat * col)(0).real() / 4.0;
            CHECK(pas[(kz - 1) * 2 + (ky - 1)] == doctest::Approx(want).epsilon(1e-9));
        }
    CHECK(std::accumulate(pas.begin(), pas.end(), 0.0) ==
          doctest::Approx(r_mat.real().trace()).epsilon(1e-9));
}

TEST_CASE("beam PAS rejects broken covariances") {
    radio::BandConfig band{2e9, 2, 1, 0.5};
    Eigen::MatrixXcd bad(2, 2);
    bad << 1.0, 1.0, 0.0, 1.0; // not Hermitian
    CHECK_THROWS_AS(beam_pas(bad, band, PasMode::kEvdSorted), NumericalError);

    Eigen::MatrixXcd neg = -Eigen::MatrixXcd::Identity(2, 2);
    CHECK_THROWS_AS(beam_pas(neg, band, PasMode::kEvdSorted), NumericalError);
    CHECK_THROWS_AS(beam_pas(neg, band, PasMode::kDftDiag), NumericalError);

    Eigen::MatrixXcd wrong = Eigen::MatrixXcd::Identity(3, 3);
    CHECK_THROWS_AS(beam_pas(wrong, band, PasMode::kEvdSorted), ConfigError);
}

TEST_CASE("fused scene assembly equals the two-step realization path") {
    radio::RegionGrid grid;
    grid.size_x_m = grid.size_y_m = 8.0;
    radio::TrajectoryPlan plan;
    plan.num_slots = 32;
    radio::BandConfig band{2e9, 2, 2, 0.5};
    auto scene = radio::generate_scene(grid, radio::Scenario::kLos, 61);

    for (PasMode mode : {PasMode::kEvdSorted, PasMode::kDftDiag}) {
        auto direct = assemble_fingerprint_from_scene(scene, grid, band, plan, mode);
        auto staged =
            assemble_fingerprint(radio::sample_channels(scene, grid, band, plan), grid, band, mode);
        REQUIRE(direct.values.count() == staged.values.count());
        for (size_t i = 0; i < direct.values.count(); i++)
            CHECK(direct.values.v[i] == staged.values.v[i]);
    }
}

TEST_CASE("grid cells replicate into pixel blocks and pool back exactly") {
    Fingerprint fp;
    fp.values = GridTensor(2, 3, 2);
    Rng rng(13);
    for (auto &v : fp.values.v)
        v = rng.uniform(0.0, 4.0);

    auto img = grid_to_pixel(fp, 2, 3); // rho = 2 horizontal, varrho = 3 vertical
    CHECK(img.values.rows == 6);
    CHECK(img.values.cols == 6);
    CHECK(img.values.channels == 2);
    for (int r = 0; r < 6; r++)
        for (int c = 0; c < 6; c++)
            for (int ch = 0; ch < 2; ch++)
                CHECK(img.values.at(r, c, ch) == fp.values.at(r / 3, c / 2, ch));

    radio::BandConfig band{2e9, 2, 1, 0.5};
    auto back = pixel_to_grid(img, band, PasMode::kEvdSorted);
    REQUIRE(back.values.count() == fp.values.count());
    for (size_t i = 0; i < fp.values.count(); i++)
        CHECK(back.values.v[i] == doctest::Approx(fp.values.v[i]).epsilon(1e-12));
}

TEST_CASE("pixel pooling averages each block") {
    GridTensor img(2, 2, 1);
    img.at(0, 0, 0) = 1.0;
    img.at(0, 1, 0) = 2.0;
    img.at(1, 0, 0) = 3.0;
    img.at(1, 1, 0) = 6.0;
    GridTensor pooled = pool_pixel_blocks(img, 2, 2);
    REQUIRE(pooled.count() == 1);
    CHECK(pooled.at(0, 0, 0) == doctest::Approx(3.0).epsilon(1e-15));

    FingerprintImage bad;
    bad.values = GridTensor(3, 3, 1);
    bad.rho = bad.varrho = 2;
    radio::BandConfig band{2e9, 1, 1, 0.5};
    CHECK_THROWS_AS(pixel_to_grid(bad, band, PasMode::kEvdSorted), ConfigError);
}

TEST_CASE("max-min normalization is per channel and inverts exactly") {
    GridTensor t(2, 2, 2);
    // channel 0 spans [1, 5]; channel 1 is constant 7
    double c0[] = {1.0, 2.0, 4.0, 5.0};
    for (int i = 0; i < 4; i++) {
        t.v[size_t(i) * 2] = c0[i];
        t.v[size_t(i) * 2 + 1] = 7.0;
    }
    auto [scaled, st] = normalize(t);
    CHECK(st.min_v[0] == 1.0);
    CHECK(st.max_v[0] == 5.0);
    CHECK(st.min_v[1] == 7.0);
    CHECK(st.max_v[1] == 7.0);
    CHECK(scaled.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(scaled.at(1, 1, 0) == doctest::Approx(1.0));
    CHECK(scaled.at(0, 1, 0) == doctest::Approx(0.25));
    for (int i = 0; i < 4; i++)
        CHECK(scaled.v[size_t(i) * 2 + 1] == 0.0); // zero-range channel pins to 0

    GridTensor back = denormalize(scaled, st);
    for (size_t i = 0; i < t.count(); i++)
        CHECK(back.v[i] == doctest::Approx(t.v[i]).epsilon(1e-12));

    GridTensor nan_t(1, 1, 1);
    nan_t.v[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(compute_stats(nan_t), NumericalError);
}

TEST_CASE("accumulated stats take the envelope over tensors") {
    GridTensor a(1, 2, 1), b(1, 2, 1);
    a.v = {2.0, 3.0};
    b.v = {-1.0, 2.5};
    NormalizationStats st;
    accumulate_stats(st, a);
    accumulate_stats(st, b);
    CHECK(st.min_v[0] == -1.0);
    CHECK(st.max_v[0] == 3.0);

    GridTensor wrong(1, 1, 2);
    CHECK_THROWS_AS(accumulate_stats(st, wrong), ConfigError);
    CHECK_THROWS_AS(normalize_with(wrong, st), ConfigError);
}

TEST_CASE("dataset files round trip exactly") {
    Dataset ds;
    ds.header.pair_count = 2;
    ds.header.rows = 2;
    ds.header.cols = 2;
    ds.header.rho = 2;
    ds.header.varrho = 2;
    ds.header.channels_i = 3;
    ds.header.channels_j = 5;
    ds.header.frequency_i_hz = 2e9;
    ds.header.frequency_j_hz = 5e9;
    ds.header.scenario = radio::Scenario::kNlos;
    ds.header.mode = PasMode::kDftDiag;

    Rng rng(17);
    size_t n_i = size_t(ds.header.image_rows()) * ds.header.image_cols() * 3;
    size_t n_j = size_t(ds.header.image_rows()) * ds.header.image_cols() * 5;
    for (int p = 0; p < 2; p++) {
        PairSample s;
        s.img_i.resize(n_i);
        s.img_j.resize(n_j);
        for (auto &v : s.img_i)
            v = float(rng.uniform(0.0, 1.0));
        for (auto &v : s.img_j)
            v = float(rng.uniform(0.0, 1.0));
        s.stats_i.min_v.assign(3, 0.0);
        s.stats_i.max_v.assign(3, 1.0 + p);
        s.stats_j.min_v.assign(5, -2.0);
        s.stats_j.max_v.assign(5, 3.0 * (p + 1));
        ds.pairs.push_back(std::move(s));
    }

    auto path = temp_file("cfx_dataset_test.cfds");
    write_dataset(path.string(), ds);
    Dataset back = read_dataset(path.string());
    CHECK(back.header.pair_count == 2);
    CHECK(back.header.rows == 2);
    CHECK(back.header.channels_i == 3);
    CHECK(back.header.channels_j == 5);
    CHECK(back.header.frequency_j_hz == 5e9);
    CHECK(back.header.scenario == radio::Scenario::kNlos);
    CHECK(back.header.mode == PasMode::kDftDiag);
    REQUIRE(back.pairs.size() == 2);
    for (int p = 0; p < 2; p++) {
        CHECK(back.pairs[p].img_i == ds.pairs[p].img_i);
        CHECK(back.pairs[p].img_j == ds.pairs[p].img_j);
        CHECK(back.pairs[p].stats_i.max_v == ds.pairs[p].stats_i.max_v);
        CHECK(back.pairs[p].stats_j.min_v == ds.pairs[p].stats_j.min_v);
    }
    std::filesystem::remove(path);
}

TEST_CASE("dataset reader rejects foreign and inconsistent files") {
    auto path = temp_file("cfx_dataset_bad.cfds");
    {
        FileWriter w(path.string());
        w.bytes("XXXX", 4);
        w.close();
        CHECK_THROWS_WITH_AS(read_dataset(path.string()), doctest::Contains("malformed dataset"),
                             IoError);
    }
    {
        FileWriter w(path.string());
        w.bytes("CFDS", 4);
        w.u16(999);
        w.close();
        CHECK_THROWS_WITH_AS(read_dataset(path.string()), doctest::Contains("version"), IoError);
    }
    Dataset ds;
    ds.header.pair_count = 3; // but no pairs attached
    CHECK_THROWS_AS(write_dataset(path.string(), ds), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("flat image buffers convert to grid tensors in row-col-channel order") {
    std::vector<float> img = {0.f, 1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f, 8.f, 9.f, 10.f, 11.f};
    GridTensor t = image_to_grid_tensor(img, 2, 3, 2);
    CHECK(t.at(0, 0, 0) == 0.0);
    CHECK(t.at(0, 0, 1) == 1.0);
    CHECK(t.at(0, 2, 1) == 5.0);
    CHECK(t.at(1, 0, 0) == 6.0);
    CHECK(t.at(1, 2, 1) == 11.0);
    CHECK_THROWS_AS(image_to_grid_tensor(img, 2, 2, 2), ConfigError);
}
