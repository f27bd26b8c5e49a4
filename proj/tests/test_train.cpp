// SPDX-License-Identifier: Apache-2.0
//
// Cycle-weight schedules, the learning-rate schedule, batch packing, loss
// reductions, the joint training loop, checkpointing, and resume.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cfx/train.hpp"

using namespace cfx;
using namespace cfx::train;

namespace {

nn::ArchitectureConfig tiny_arch(int in_c, int out_c) {
    nn::ArchitectureConfig cfg;
    cfg.in_channels = in_c;
    cfg.out_channels = out_c;
    cfg.base_width = 8;
    cfg.width_cap = 8;
    cfg.encoder_stages = 2;
    cfg.decoder_stages = 2;
    cfg.residual_blocks = 1;
    cfg.groupnorm_groups = 4;
    return cfg;
}

// Six-pair dataset on a 2x2 grid with 2x2 replication; band j is the
// pointwise complement of band i, a mapping small networks can learn.
fp::Dataset tiny_dataset(int pairs = 6, int channels = 4) {
    fp::Dataset ds;
    ds.header.pair_count = uint32_t(pairs);
    ds.header.rows = 2;
    ds.header.cols = 2;
    ds.header.rho = 2;
    ds.header.varrho = 2;
    ds.header.channels_i = uint32_t(channels);
    ds.header.channels_j = uint32_t(channels);
    ds.header.frequency_i_hz = 2e9;
    ds.header.frequency_j_hz = 5e9;
    Rng rng(71);
    size_t count = size_t(ds.header.image_rows()) * ds.header.image_cols() * channels;
    for (int p = 0; p < pairs; p++) {
        fp::PairSample s;
        s.img_i.resize(count);
        s.img_j.resize(count);
        for (size_t k = 0; k < count; k++) {
            s.img_i[k] = float(rng.uniform());
            s.img_j[k] = 1.0f - s.img_i[k];
        }
        s.stats_i.min_v.assign(size_t(channels), 0.0);
        s.stats_i.max_v.assign(size_t(channels), 1.0);
        s.stats_j = s.stats_i;
        ds.pairs.push_back(std::move(s));
    }
    return ds;
}

TrainConfig tiny_config(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.decay_start_epoch = epochs; // constant learning rate
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 2;
    cfg.seed = 3;
    return cfg;
}

void require_same_pair(const nn::TranslatorPair &a, const nn::TranslatorPair &b) {
    auto pa = a.param_union(), pb = b.param_union();
    REQUIRE(pa.size() == pb.size());
    for (size_t t = 0; t < pa.size(); t++) {
        REQUIRE(pa[t]->name == pb[t]->name);
        REQUIRE(pa[t]->w == pb[t]->w);
    }
    CHECK(a.adam.steps == b.adam.steps);
    REQUIRE(a.adam.m.size() == b.adam.m.size());
    for (size_t t = 0; t < a.adam.m.size(); t++) {
        CHECK(a.adam.m[t] == b.adam.m[t]);
        CHECK(a.adam.v[t] == b.adam.v[t]);
    }
    CHECK(a.epochs_done == b.epochs_done);
    CHECK(a.shuffle_state == b.shuffle_state);
}

std::filesystem::path temp_dir(const char *name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("weight schedules follow their closed forms") {
    for (double omega : {0.0, 0.125, 0.5, 0.875, 1.0}) {
        CHECK(weight_value(WeightKind::kLinearInc, omega) == doctest::Approx(omega));
        CHECK(weight_value(WeightKind::kCubicInc, omega) ==
              doctest::Approx(omega * omega * omega));
        CHECK(weight_value(WeightKind::kExpInc, omega) ==
              doctest::Approx(1.0 - std::exp(-3.0 * omega)));
        CHECK(weight_value(WeightKind::kConstant, omega) == 0.5);
        CHECK(weight_value(WeightKind::kLinearDec, omega) == doctest::Approx(1.0 - omega));
        CHECK(weight_value(WeightKind::kCubicDec, omega) ==
              doctest::Approx(1.0 - omega * omega * omega));
        CHECK(weight_value(WeightKind::kExpDec, omega) ==
              doctest::Approx(std::exp(-3.0 * omega)));
        CHECK(weight_value(WeightKind::kZero, omega) == 0.0);
    }
    // increasing kinds start near 0 and end at 1; decreasing kinds mirror that
    for (auto kind : {WeightKind::kLinearInc, WeightKind::kCubicInc, WeightKind::kExpInc}) {
        CHECK(weight_at(kind, 1, 1000) < 0.01);
        CHECK(weight_at(kind, 1000, 1000) > 0.94);
    }
    CHECK(weight_at(WeightKind::kLinearDec, 1000, 1000) == doctest::Approx(0.0));

    CHECK_THROWS_AS(weight_at(WeightKind::kLinearInc, 0, 10), ConfigError);
    CHECK_THROWS_AS(weight_at(WeightKind::kLinearInc, 11, 10), ConfigError);
}

TEST_CASE("weight kind names round trip and accept the short labels") {
    for (auto kind : {WeightKind::kLinearInc, WeightKind::kCubicInc, WeightKind::kExpInc,
                      WeightKind::kConstant, WeightKind::kLinearDec, WeightKind::kCubicDec,
                      WeightKind::kExpDec, WeightKind::kZero})
        CHECK(weight_kind_from_name(weight_kind_name(kind)) == kind);
    CHECK(weight_kind_from_name("f1") == WeightKind::kLinearInc);
    CHECK(weight_kind_from_name("f2") == WeightKind::kCubicInc);
    CHECK(weight_kind_from_name("f3") == WeightKind::kExpInc);
    CHECK(weight_kind_from_name("f0") == WeightKind::kConstant);
    CHECK(weight_kind_from_name("f4") == WeightKind::kLinearDec);
    CHECK(weight_kind_from_name("f5") == WeightKind::kCubicDec);
    CHECK(weight_kind_from_name("f6") == WeightKind::kExpDec);
    CHECK_THROWS_AS(weight_kind_from_name("f9"), ConfigError);
}

TEST_CASE("learning rate holds then decays linearly to zero") {
    TrainConfig cfg;
    cfg.epochs = 80;
    cfg.decay_start_epoch = 40;
    cfg.learning_rate = 1e-4;
    CHECK(schedule_lr(cfg, 0.0) == 1e-4);
    CHECK(schedule_lr(cfg, 39.9) == 1e-4);
    CHECK(schedule_lr(cfg, 40.0) == 1e-4);
    CHECK(schedule_lr(cfg, 60.0) == doctest::Approx(0.5e-4));
    CHECK(schedule_lr(cfg, 70.0) == doctest::Approx(0.25e-4));
    CHECK(schedule_lr(cfg, 80.0) == doctest::Approx(0.0));

    cfg.decay_start_epoch = cfg.epochs;
    CHECK(schedule_lr(cfg, 79.5) == 1e-4);

    cfg.decay_start_epoch = 81;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.decay_start_epoch = 40;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("batches map unit-interval images onto the symmetric range") {
    fp::Dataset ds = tiny_dataset(2, 3);
    ds.pairs[1].img_i[0] = 0.0f;
    ds.pairs[1].img_i[1] = 1.0f;
    ds.pairs[1].img_i[2] = 0.25f;

    nn::Tensor<float> x = make_batch(ds, {1, 0}, true);
    CHECK(x.n == 2);
    CHECK(x.c == 3);
    CHECK(x.h == 4);
    CHECK(x.w == 4);
    // sample 0 of the batch is dataset pair 1; HWC to NCHW
    CHECK(x.at(0, 0, 0, 0) == -1.0f);
    CHECK(x.at(0, 1, 0, 0) == 1.0f);
    CHECK(x.at(0, 2, 0, 0) == -0.5f);
    CHECK(x.at(1, 0, 0, 0) == ds.pairs[0].img_i[0] * 2.0f - 1.0f);

    std::vector<float> img = net_output_to_image(x, 0);
    for (size_t k = 0; k < img.size(); k++)
        CHECK(img[k] == doctest::Approx(ds.pairs[1].img_i[k]).epsilon(1e-6));

    CHECK_THROWS_AS(make_batch(ds, {2}, true), ConfigError);
}

TEST_CASE("loss reductions against zero networks") {
    auto arch = tiny_arch(3, 3);
    nn::TranslatorNetwork<float> net_ij(arch), net_ji(arch);
    for (auto *p : net_ij.params())
        std::fill(p->w.begin(), p->w.end(), 0.0f);
    for (auto *p : net_ji.params())
        std::fill(p->w.begin(), p->w.end(), 0.0f);

    fp::Dataset ds = tiny_dataset(1, 3);
    std::fill(ds.pairs[0].img_i.begin(), ds.pairs[0].img_i.end(), 0.0f);
    std::fill(ds.pairs[0].img_j.begin(), ds.pairs[0].img_j.end(), 0.0f);
    nn::Tensor<float> x_i = make_batch(ds, {0}, true);
    nn::Tensor<float> x_j = make_batch(ds, {0}, false);

    // zero networks output zero, every target entry is -1
    CHECK(basic_loss(net_ij, x_i, x_j) == doctest::Approx(1.0));
    CHECK(cycle_loss(net_ij, net_ji, x_i, x_j) == doctest::Approx(2.0));
}

TEST_CASE("cycle gradients reach both networks of the pair") {
    nn::TranslatorPair pair(tiny_arch(4, 4), tiny_arch(4, 4), 11);
    pair.ij.zero_grads();
    pair.ji.zero_grads();

    fp::Dataset ds = tiny_dataset(1, 4);
    nn::Tensor<float> x_i = make_batch(ds, {0}, true);

    // round trip i -> j -> i with the loss only on the reconstruction
    nn::Tape<float> tape_ij, tape_ji;
    nn::Tensor<float> y_j = pair.ij.forward(x_i, &tape_ij);
    nn::Tensor<float> r_i = pair.ji.forward(y_j, &tape_ji);
    nn::Tensor<float> dr(r_i.n, r_i.c, r_i.h, r_i.w);
    for (size_t k = 0; k < dr.count(); k++)
        dr.v[k] = 2.0f * (r_i.v[k] - x_i.v[k]) / float(dr.count());
    nn::Tensor<float> dy = pair.ji.backward(dr, tape_ji);
    pair.ij.backward(dy, tape_ij);

    auto grad_norm = [](nn::TranslatorNetwork<float> &net) {
        double acc = 0.0;
        for (auto *p : net.params())
            for (float g : p->g)
                acc += double(g) * g;
        return std::sqrt(acc);
    };
    CHECK(grad_norm(pair.ij) > 1e-6);
    CHECK(grad_norm(pair.ji) > 1e-6);
}

TEST_CASE("training reduces the joint loss and logs exact identities") {
    fp::Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(6);
    TrainResult res = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg);

    const int spe = 3; // 6 pairs, batch 2
    REQUIRE(res.epochs.size() == 6);
    REQUIRE(res.steps.size() == size_t(spe) * 6);
    CHECK(res.pair.adam.steps == uint64_t(spe) * 6);
    CHECK(res.pair.epochs_done == 6);
    CHECK(res.pair.frequency_i_hz == 2e9);
    CHECK(res.pair.frequency_j_hz == 5e9);

    // The joint number itself rises with the growing cycle weight; the
    // underlying reconstruction errors are what must improve.
    CHECK(res.epochs.back().basic_ij < res.epochs.front().basic_ij);
    CHECK(res.epochs.back().basic_ji < res.epochs.front().basic_ji);
    CHECK(res.epochs.back().cycle < res.epochs.front().cycle);

    const uint64_t total = uint64_t(spe) * 6;
    for (size_t s = 0; s < res.steps.size(); s++) {
        const LossBundle &b = res.steps[s];
        CHECK(b.weight ==
              doctest::Approx(weight_at(cfg.weight_fn, s + 1, total)).epsilon(1e-15));
        CHECK(b.lr == doctest::Approx(schedule_lr(cfg, double(s) / spe)).epsilon(1e-15));
        CHECK(b.weighted_cycle == b.weight * b.cycle);
        CHECK(b.joint == b.basic_ij + b.basic_ji + b.weighted_cycle);
        CHECK(b.cycle > 0.0);
    }
}

TEST_CASE("training is deterministic under the seed") {
    fp::Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(2);
    TrainResult a = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg);
    TrainResult b = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg);
    require_same_pair(a.pair, b.pair);

    cfg.seed = 4;
    TrainResult c = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg);
    CHECK(c.pair.param_union().front()->w != a.pair.param_union().front()->w);
}

TEST_CASE("disabling the cycle loss equals the all-zero weight schedule") {
    fp::Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(2);
    cfg.use_cycle_loss = false;
    TrainResult off = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg);
    for (const auto &b : off.steps) {
        CHECK(b.weight == 0.0);
        CHECK(b.cycle == 0.0);
        CHECK(b.joint == b.basic_ij + b.basic_ji);
    }

    cfg.use_cycle_loss = true;
    cfg.weight_fn = WeightKind::kZero;
    TrainResult zero = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg);
    require_same_pair(off.pair, zero.pair);
}

TEST_CASE("checkpoints round trip the full training state") {
    auto dir = temp_dir("cfx_ckpt_test");
    fp::Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(3);
    cfg.weight_fn = WeightKind::kExpDec;
    TrainResult res = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg, dir.string());

    nn::TranslatorPair back = nn::load_checkpoint((dir / "checkpoint.cfck").string());
    require_same_pair(res.pair, back);
    CHECK(back.train_seed == cfg.seed);
    CHECK(back.stats_i.min_v == res.pair.stats_i.min_v);
    CHECK(back.stats_j.max_v == res.pair.stats_j.max_v);
    CHECK(back.frequency_i_hz == 2e9);
    CHECK(back.frequency_j_hz == 5e9);
    CHECK(back.scenario == res.pair.scenario);
    CHECK(back.mode == res.pair.mode);

    CHECK_THROWS_AS(nn::load_checkpoint((dir / "missing.cfck").string()), IoError);
    {
        std::ofstream bad(dir / "bad.cfck", std::ios::binary);
        bad << "JUNKJUNKJUNK";
    }
    CHECK_THROWS_AS(nn::load_checkpoint((dir / "bad.cfck").string()), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("loss logs accompany the checkpoint") {
    auto dir = temp_dir("cfx_losslog_test");
    fp::Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config(2);
    train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg, dir.string());

    std::ifstream log(dir / "loss_log.csv");
    REQUIRE(log.good());
    std::string line;
    std::getline(log, line);
    CHECK(line == "epoch,basic_ij,basic_ji,cycle,weight,joint,lr");
    int rows = 0;
    while (std::getline(log, line))
        if (!line.empty())
            rows++;
    CHECK(rows == 2);

    std::ifstream steps(dir / "loss_steps.csv");
    REQUIRE(steps.good());
    std::getline(steps, line);
    rows = 0;
    while (std::getline(steps, line))
        if (!line.empty())
            rows++;
    CHECK(rows == 6);
    std::filesystem::remove_all(dir);
}

TEST_CASE("a split run resumed from its checkpoint matches the continuous run") {
    fp::Dataset ds = tiny_dataset();

    // constant learning rate and no cycle term keep the schedules horizon-free
    TrainConfig cfg4 = tiny_config(4);
    cfg4.use_cycle_loss = false;
    TrainResult continuous = train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg4);

    auto dir = temp_dir("cfx_resume_test");
    TrainConfig cfg2 = cfg4;
    cfg2.epochs = 2;
    cfg2.decay_start_epoch = 2;
    train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg2, dir.string());

    nn::TranslatorPair mid = nn::load_checkpoint((dir / "checkpoint.cfck").string());
    CHECK(mid.epochs_done == 2);
    TrainResult resumed = resume_pair(std::move(mid), ds, cfg4, dir.string());
    require_same_pair(continuous.pair, resumed.pair);

    // resuming a finished run is refused
    nn::TranslatorPair done = nn::load_checkpoint((dir / "checkpoint.cfck").string());
    CHECK_THROWS_AS(resume_pair(std::move(done), ds, cfg4), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite data aborts training with the numerical error") {
    fp::Dataset ds = tiny_dataset(2, 4);
    std::fill(ds.pairs[0].img_i.begin(), ds.pairs[0].img_i.end(),
              std::numeric_limits<float>::quiet_NaN());
    TrainConfig cfg = tiny_config(1);
    cfg.batch_size = 2;
    auto dir = temp_dir("cfx_abort_test");
    CHECK_THROWS_AS(train_pair(ds, tiny_arch(4, 4), tiny_arch(4, 4), cfg, dir.string()),
                    NumericalError);
    // the pre-training state was still checkpointed
    CHECK(std::filesystem::exists(dir / "checkpoint.cfck"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("training rejects mismatched datasets") {
    fp::Dataset ds = tiny_dataset(2, 4);
    TrainConfig cfg = tiny_config(1);
    CHECK_THROWS_AS(train_pair(ds, tiny_arch(3, 4), tiny_arch(4, 3), cfg), ConfigError);
    fp::Dataset empty;
    CHECK_THROWS_AS(train_pair(empty, tiny_arch(4, 4), tiny_arch(4, 4), cfg), ConfigError);
}
