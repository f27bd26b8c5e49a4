// SPDX-License-Identifier: Apache-2.0

#include "cfx/datagen.hpp"

#include <filesystem>

#include "cfx/rng.hpp"

namespace cfx::gen {

void GenConfig::validate() const {
    grid.validate();
    plan.validate(grid);
    band_i.validate();
    band_j.validate();
    if (rho < 1 || varrho < 1)
        throw ConfigError("gen config: replication factors must be >= 1");
    if (train_count < 1)
        throw ConfigError("gen config: training split needs at least one pair");
    if (test_count < 0)
        throw ConfigError("gen config: test pair count must be non-negative");
}

uint64_t scene_seed_for(uint64_t master_seed, int index) {
    return derive_seed(master_seed, {uint64_t(kStreamScene), uint64_t(index)});
}

namespace {

std::vector<float> to_image(const fp::GridTensor &grid_values,
                            const fp::NormalizationStats &stats, int rho, int varrho) {
    fp::GridTensor img =
        fp::replicate_grid_cells(fp::normalize_with(grid_values, stats), rho, varrho);
    std::vector<float> out(img.count());
    for (size_t i = 0; i < img.count(); i++)
        out[i] = float(img.v[i]);
    return out;
}

} // namespace

GenManifest generate_datasets(const GenConfig &cfg, const std::string &out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    const size_t total = size_t(cfg.train_count) + size_t(cfg.test_count);
    std::vector<fp::Fingerprint> fps_i(total);
    std::vector<fp::Fingerprint> fps_j(total);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < int(total); p++) {
        uint64_t scene_seed = scene_seed_for(cfg.seed, p);
        radio::PropagationScene scene =
            radio::generate_scene(cfg.grid, cfg.scenario, scene_seed, cfg.scene_params);
        fps_i[size_t(p)] =
            fp::assemble_fingerprint_from_scene(scene, cfg.grid, cfg.band_i, cfg.plan, cfg.mode);
        fps_j[size_t(p)] =
            fp::assemble_fingerprint_from_scene(scene, cfg.grid, cfg.band_j, cfg.plan, cfg.mode);
    }

    fp::NormalizationStats stats_i, stats_j;
    for (int p = 0; p < cfg.train_count; p++) {
        fp::accumulate_stats(stats_i, fps_i[size_t(p)].values);
        fp::accumulate_stats(stats_j, fps_j[size_t(p)].values);
    }

    auto build = [&](int lo, int hi) {
        fp::Dataset ds;
        ds.header.pair_count = uint32_t(hi - lo);
        ds.header.rows = uint32_t(cfg.grid.rows());
        ds.header.cols = uint32_t(cfg.grid.cols());
        ds.header.rho = uint32_t(cfg.rho);
        ds.header.varrho = uint32_t(cfg.varrho);
        ds.header.channels_i = uint32_t(cfg.band_i.total_antennas());
        ds.header.channels_j = uint32_t(cfg.band_j.total_antennas());
        ds.header.frequency_i_hz = cfg.band_i.frequency_hz;
        ds.header.frequency_j_hz = cfg.band_j.frequency_hz;
        ds.header.scenario = cfg.scenario;
        ds.header.mode = cfg.mode;
        ds.pairs.resize(size_t(hi - lo));
        for (int p = lo; p < hi; p++) {
            fp::PairSample &sample = ds.pairs[size_t(p - lo)];
            sample.img_i = to_image(fps_i[size_t(p)].values, stats_i, cfg.rho, cfg.varrho);
            sample.img_j = to_image(fps_j[size_t(p)].values, stats_j, cfg.rho, cfg.varrho);
            sample.stats_i = stats_i;
            sample.stats_j = stats_j;
        }
        return ds;
    };

    GenManifest manifest;
    manifest.seed = cfg.seed;
    manifest.train_count = cfg.train_count;
    manifest.test_count = cfg.test_count;
    manifest.train_path = out_dir + "/train.cfds";
    manifest.test_path = out_dir + "/test.cfds";
    fp::write_dataset(manifest.train_path, build(0, cfg.train_count));
    fp::write_dataset(manifest.test_path, build(cfg.train_count, total));
    manifest.train_hash = hash_file(manifest.train_path);
    manifest.test_hash = hash_file(manifest.test_path);
    return manifest;
}

} // namespace cfx::gen
