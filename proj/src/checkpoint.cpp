// SPDX-License-Identifier: Apache-2.0

#include "cfx/nn/checkpoint.hpp"

#include <cmath>

#include "cfx/common.hpp"

namespace cfx::nn {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'C', 'K'};
constexpr uint16_t kVersion = 1;

void write_geom(FileWriter &w, const ConvGeom &g) {
    w.u32(uint32_t(g.kernel));
    w.u32(uint32_t(g.stride));
    w.u32(uint32_t(g.pad));
    w.u32(uint32_t(g.out_pad));
}

ConvGeom read_geom(FileReader &r) {
    ConvGeom g;
    g.kernel = int(r.u32());
    g.stride = int(r.u32());
    g.pad = int(r.u32());
    g.out_pad = int(r.u32());
    return g;
}

void write_arch(FileWriter &w, const ArchitectureConfig &c) {
    w.u32(uint32_t(c.in_channels));
    w.u32(uint32_t(c.out_channels));
    w.u32(uint32_t(c.base_width));
    w.u32(uint32_t(c.width_cap));
    w.u32(uint32_t(c.encoder_stages));
    w.u32(uint32_t(c.decoder_stages));
    w.u32(uint32_t(c.residual_blocks));
    w.u32(uint32_t(c.groupnorm_groups));
    w.f32(c.gn_eps);
    write_geom(w, c.stem_geom);
    write_geom(w, c.stage_geom);
    write_geom(w, c.upsample_geom);
    write_geom(w, c.residual_geom);
}

ArchitectureConfig read_arch(FileReader &r) {
    ArchitectureConfig c;
    c.in_channels = int(r.u32());
    c.out_channels = int(r.u32());
    c.base_width = int(r.u32());
    c.width_cap = int(r.u32());
    c.encoder_stages = int(r.u32());
    c.decoder_stages = int(r.u32());
    c.residual_blocks = int(r.u32());
    c.groupnorm_groups = int(r.u32());
    c.gn_eps = r.f32();
    c.stem_geom = read_geom(r);
    c.stage_geom = read_geom(r);
    c.upsample_geom = read_geom(r);
    c.residual_geom = read_geom(r);
    return c;
}

void write_stats(FileWriter &w, const fp::NormalizationStats &st) {
    w.u32(uint32_t(st.channels()));
    for (double v : st.min_v)
        w.f64(v);
    for (double v : st.max_v)
        w.f64(v);
}

fp::NormalizationStats read_stats(FileReader &r) {
    uint32_t channels = r.u32();
    fp::NormalizationStats st;
    st.min_v.resize(channels);
    st.max_v.resize(channels);
    for (auto &v : st.min_v)
        v = r.f64();
    for (auto &v : st.max_v)
        v = r.f64();
    return st;
}

void write_named_tensor(FileWriter &w, const ParamTensor<float> &p) {
    w.u16(uint16_t(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u32(uint32_t(p.shape.size()));
    for (int d : p.shape)
        w.u32(uint32_t(d));
    w.f32_array(p.w.data(), p.w.size());
}

void read_named_tensor(FileReader &r, ParamTensor<float> &p) {
    uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    if (name != p.name)
        throw IoError("checkpoint: tensor name mismatch, expected " + p.name + " got " + name);
    uint32_t rank = r.u32();
    if (rank != p.shape.size())
        throw IoError("checkpoint: tensor rank mismatch for " + p.name);
    for (int d : p.shape)
        if (r.u32() != uint32_t(d))
            throw IoError("checkpoint: tensor shape mismatch for " + p.name);
    r.f32_array(p.w.data(), p.w.size());
    for (float v : p.w)
        if (!std::isfinite(v))
            throw IoError("checkpoint: non-finite value in tensor " + p.name);
}

} // namespace

TranslatorPair::TranslatorPair(const ArchitectureConfig &cfg_ij, const ArchitectureConfig &cfg_ji,
                               uint64_t seed)
    : ij(cfg_ij), ji(cfg_ji), train_seed(seed) {
    if (cfg_ij.in_channels != cfg_ji.out_channels || cfg_ij.out_channels != cfg_ji.in_channels)
        throw ConfigError("translator pair: directions are not mutually inverse");
    // Distinct init streams so each network's starting point is independent
    // of the other's architecture.
    Rng rng_ij(derive_seed(seed, {uint64_t(kStreamInit), 1}));
    ij.init(rng_ij);
    Rng rng_ji(derive_seed(seed, {uint64_t(kStreamInit), 2}));
    ji.init(rng_ji);
    for (auto *p : param_union()) {
        adam.m.emplace_back(p->count(), 0.0f);
        adam.v.emplace_back(p->count(), 0.0f);
    }
}

std::vector<ParamTensor<float> *> TranslatorPair::param_union() {
    std::vector<ParamTensor<float> *> all = ij.params();
    all.insert(all.end(), ji.params().begin(), ji.params().end());
    return all;
}

std::vector<const ParamTensor<float> *> TranslatorPair::param_union() const {
    std::vector<const ParamTensor<float> *> all(ij.params().begin(), ij.params().end());
    all.insert(all.end(), ji.params().begin(), ji.params().end());
    return all;
}

void save_checkpoint(const std::string &path, const TranslatorPair &pair) {
    FileWriter w(path);
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    write_arch(w, pair.ij.config());
    write_arch(w, pair.ji.config());
    w.u8(uint8_t(pair.scenario));
    w.u8(uint8_t(pair.mode));
    w.f64(pair.frequency_i_hz);
    w.f64(pair.frequency_j_hz);
    w.u64(pair.train_seed);
    w.u32(pair.epochs_done);
    for (uint64_t s : pair.shuffle_state)
        w.u64(s);
    w.f64(pair.adam.beta1);
    w.f64(pair.adam.beta2);
    w.f64(pair.adam.eps);
    w.u64(pair.adam.steps);
    write_stats(w, pair.stats_i);
    write_stats(w, pair.stats_j);
    for (const auto *p : pair.param_union())
        write_named_tensor(w, *p);
    for (const auto &m : pair.adam.m)
        w.f32_array(m.data(), m.size());
    for (const auto &v : pair.adam.v)
        w.f32_array(v.data(), v.size());
    w.close();
}

TranslatorPair load_checkpoint(const std::string &path) {
    FileReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string_view(magic, 4) != std::string_view(kMagic, 4))
        throw IoError("checkpoint: malformed header: bad magic");
    if (r.u16() != kVersion)
        throw IoError("checkpoint: unsupported version");
    ArchitectureConfig cfg_ij = read_arch(r);
    ArchitectureConfig cfg_ji = read_arch(r);
    uint8_t scenario = r.u8();
    uint8_t mode = r.u8();
    if (scenario > 1 || mode > 1)
        throw IoError("checkpoint: unknown scenario or mode flag");
    double freq_i = r.f64();
    double freq_j = r.f64();
    uint64_t seed = r.u64();
    uint32_t epochs = r.u32();
    std::array<uint64_t, 4> shuffle{};
    for (auto &s : shuffle)
        s = r.u64();
    double beta1 = r.f64();
    double beta2 = r.f64();
    double eps = r.f64();
    uint64_t steps = r.u64();
    fp::NormalizationStats stats_i = read_stats(r);
    fp::NormalizationStats stats_j = read_stats(r);

    TranslatorPair pair(cfg_ij, cfg_ji, seed);
    pair.scenario = radio::Scenario(scenario);
    pair.mode = fp::PasMode(mode);
    pair.frequency_i_hz = freq_i;
    pair.frequency_j_hz = freq_j;
    pair.epochs_done = epochs;
    pair.shuffle_state = shuffle;
    pair.adam.beta1 = beta1;
    pair.adam.beta2 = beta2;
    pair.adam.eps = eps;
    pair.adam.steps = steps;
    auto params = pair.param_union();
    pair.stats_i = std::move(stats_i);
    pair.stats_j = std::move(stats_j);
    for (auto *p : params)
        read_named_tensor(r, *p);
    for (auto &m : pair.adam.m)
        r.f32_array(m.data(), m.size());
    for (auto &v : pair.adam.v)
        r.f32_array(v.data(), v.size());
    if (!r.at_eof())
        throw IoError("checkpoint: trailing bytes after optimizer state");
    return pair;
}

} // namespace cfx::nn
