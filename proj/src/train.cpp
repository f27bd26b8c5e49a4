// SPDX-License-Identifier: Apache-2.0

#include "cfx/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cfx/common.hpp"

namespace cfx::train {

using nn::Tensor;

double weight_value(WeightKind kind, double omega) {
    switch (kind) {
    case WeightKind::kLinearInc:
        return omega;
    case WeightKind::kCubicInc:
        return omega * omega * omega;
    case WeightKind::kExpInc:
        return 1.0 - std::exp(-3.0 * omega);
    case WeightKind::kConstant:
        return 0.5;
    case WeightKind::kLinearDec:
        return 1.0 - omega;
    case WeightKind::kCubicDec:
        return 1.0 - omega * omega * omega;
    case WeightKind::kExpDec:
        return std::exp(-3.0 * omega);
    case WeightKind::kZero:
        return 0.0;
    }
    throw ConfigError("weight function: unknown kind");
}

double weight_at(WeightKind kind, uint64_t d, uint64_t total) {
    if (total == 0 || d < 1 || d > total)
        throw ConfigError("weight function: step index out of range");
    return weight_value(kind, double(d) / double(total));
}

const char *weight_kind_name(WeightKind kind) {
    switch (kind) {
    case WeightKind::kLinearInc:
        return "linear_inc";
    case WeightKind::kCubicInc:
        return "cubic_inc";
    case WeightKind::kExpInc:
        return "exp_inc";
    case WeightKind::kConstant:
        return "constant";
    case WeightKind::kLinearDec:
        return "linear_dec";
    case WeightKind::kCubicDec:
        return "cubic_dec";
    case WeightKind::kExpDec:
        return "exp_dec";
    case WeightKind::kZero:
        return "zero";
    }
    return "unknown";
}

WeightKind weight_kind_from_name(const std::string &name) {
    static const std::pair<const char *, WeightKind> table[] = {
        {"linear_inc", WeightKind::kLinearInc}, {"f1", WeightKind::kLinearInc},
        {"cubic_inc", WeightKind::kCubicInc},   {"f2", WeightKind::kCubicInc},
        {"exp_inc", WeightKind::kExpInc},       {"f3", WeightKind::kExpInc},
        {"constant", WeightKind::kConstant},    {"f0", WeightKind::kConstant},
        {"linear_dec", WeightKind::kLinearDec}, {"f4", WeightKind::kLinearDec},
        {"cubic_dec", WeightKind::kCubicDec},   {"f5", WeightKind::kCubicDec},
        {"exp_dec", WeightKind::kExpDec},       {"f6", WeightKind::kExpDec},
        {"zero", WeightKind::kZero},
    };
    for (const auto &[key, kind] : table)
        if (name == key)
            return kind;
    throw ConfigError("weight function: unknown name '" + name + "'");
}

void TrainConfig::validate() const {
    if (epochs < 1)
        throw ConfigError("train config: epochs must be positive");
    if (decay_start_epoch < 0 || decay_start_epoch > epochs)
        throw ConfigError("train config: decay start must lie within the epoch range");
    if (!(learning_rate > 0.0))
        throw ConfigError("train config: learning rate must be positive");
    if (batch_size < 1)
        throw ConfigError("train config: batch size must be positive");
    if (checkpoint_every < 0)
        throw ConfigError("train config: checkpoint cadence must be non-negative");
}

double schedule_lr(const TrainConfig &cfg, double epoch_pos) {
    if (epoch_pos <= double(cfg.decay_start_epoch) || cfg.decay_start_epoch == cfg.epochs)
        return cfg.learning_rate;
    double remain = double(cfg.epochs) - epoch_pos;
    double span = double(cfg.epochs - cfg.decay_start_epoch);
    return cfg.learning_rate * std::max(0.0, remain / span);
}

namespace {

double mse(const Tensor<float> &pred, const Tensor<float> &target) {
    if (!pred.same_shape(target))
        throw ConfigError("loss: prediction and target shapes differ");
    double acc = 0.0;
    const size_t n = pred.count();
    for (size_t i = 0; i < n; i++) {
        double d = double(pred.v[i]) - double(target.v[i]);
        acc += d * d;
    }
    return acc / double(n);
}

// Loss value plus d(scale * mse)/d(pred) accumulated into dpred.
double mse_and_grad(const Tensor<float> &pred, const Tensor<float> &target, double scale,
                    Tensor<float> &dpred) {
    if (!pred.same_shape(target))
        throw ConfigError("loss: prediction and target shapes differ");
    double acc = 0.0;
    const size_t n = pred.count();
    const double g_scale = 2.0 * scale / double(n);
    for (size_t i = 0; i < n; i++) {
        double d = double(pred.v[i]) - double(target.v[i]);
        acc += d * d;
        dpred.v[i] += float(g_scale * d);
    }
    return acc / double(n);
}

void check_pair_compat(const nn::TranslatorNetwork<float> &net_ij,
                       const nn::TranslatorNetwork<float> &net_ji) {
    if (net_ij.config().in_channels != net_ji.config().out_channels ||
        net_ij.config().out_channels != net_ji.config().in_channels)
        throw ConfigError("translator pair: directions are not mutually inverse");
}

std::vector<int> shuffled_order(int n, Rng &rng) {
    std::vector<int> order(size_t(n), 0);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; i--) {
        int j = rng.uniform_int(0, i);
        std::swap(order[size_t(i)], order[size_t(j)]);
    }
    return order;
}

std::string csv_row(int epoch, const LossBundle &b) {
    std::ostringstream os;
    os << std::setprecision(17) << epoch << ',' << b.basic_ij << ',' << b.basic_ji << ','
       << b.cycle << ',' << b.weight << ',' << b.joint << ',' << b.lr << '\n';
    return os.str();
}

constexpr const char *kCsvHeader = "epoch,basic_ij,basic_ji,cycle,weight,joint,lr\n";

void adam_step(nn::TranslatorPair &pair, double lr) {
    auto params = pair.param_union();
    nn::AdamState &st = pair.adam;
    st.steps += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.steps));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.steps));
#pragma omp parallel for schedule(dynamic)
    for (long t = 0; t < long(params.size()); t++) {
        nn::ParamTensor<float> *p = params[size_t(t)];
        std::vector<float> &m = st.m[size_t(t)];
        std::vector<float> &v = st.v[size_t(t)];
        for (size_t k = 0; k < p->w.size(); k++) {
            double g = p->g[k];
            double mn = st.beta1 * double(m[k]) + (1.0 - st.beta1) * g;
            double vn = st.beta2 * double(v[k]) + (1.0 - st.beta2) * g * g;
            m[k] = float(mn);
            v[k] = float(vn);
            double update = lr * (mn / bc1) / (std::sqrt(vn / bc2) + st.eps);
            p->w[k] = float(double(p->w[k]) - update);
        }
    }
}

struct EpochAccum {
    LossBundle sum;
    int steps = 0;

    void add(const LossBundle &b) {
        sum.basic_ij += b.basic_ij;
        sum.basic_ji += b.basic_ji;
        sum.cycle += b.cycle;
        sum.weight += b.weight;
        sum.weighted_cycle += b.weighted_cycle;
        sum.joint += b.joint;
        sum.lr += b.lr;
        steps++;
    }
    LossBundle mean() const {
        LossBundle m = sum;
        double inv = 1.0 / double(steps);
        m.basic_ij *= inv;
        m.basic_ji *= inv;
        m.cycle *= inv;
        m.weight *= inv;
        m.weighted_cycle *= inv;
        m.joint *= inv;
        m.lr *= inv;
        return m;
    }
};

// One optimizer step over a batch; returns the logged loss components.
LossBundle train_step(nn::TranslatorPair &pair, const Tensor<float> &x_i,
                      const Tensor<float> &x_j, double weight, double lr) {
    pair.ij.zero_grads();
    pair.ji.zero_grads();

    nn::Tape<float> tape_ij, tape_ji;
    Tensor<float> y_j = pair.ij.forward(x_i, &tape_ij);
    Tensor<float> y_i = pair.ji.forward(x_j, &tape_ji);

    LossBundle b;
    b.weight = weight;
    b.lr = lr;

    Tensor<float> dy_j(y_j.n, y_j.c, y_j.h, y_j.w);
    Tensor<float> dy_i(y_i.n, y_i.c, y_i.h, y_i.w);

    if (weight != 0.0) {
        // Second legs of the two round trips, each reusing the primary
        // prediction as input.
        nn::Tape<float> tape_cyc_ji, tape_cyc_ij;
        Tensor<float> r_i = pair.ji.forward(y_j, &tape_cyc_ji);
        Tensor<float> r_j = pair.ij.forward(y_i, &tape_cyc_ij);

        Tensor<float> dr_i(r_i.n, r_i.c, r_i.h, r_i.w);
        Tensor<float> dr_j(r_j.n, r_j.c, r_j.h, r_j.w);
        double cyc_i = mse_and_grad(r_i, x_i, weight, dr_i);
        double cyc_j = mse_and_grad(r_j, x_j, weight, dr_j);
        b.cycle = cyc_i + cyc_j;

        // Cycle gradients reach the primary outputs through the second-leg
        // networks before the primary losses are added.
        dy_j = pair.ji.backward(dr_i, tape_cyc_ji);
        dy_i = pair.ij.backward(dr_j, tape_cyc_ij);
    }

    b.basic_ij = mse_and_grad(y_j, x_j, 1.0, dy_j);
    b.basic_ji = mse_and_grad(y_i, x_i, 1.0, dy_i);
    pair.ij.backward(dy_j, tape_ij);
    pair.ji.backward(dy_i, tape_ji);

    b.weighted_cycle = b.weight * b.cycle;
    b.joint = b.basic_ij + b.basic_ji + b.weight * b.cycle;
    adam_step(pair, lr);
    return b;
}

TrainResult run_training(nn::TranslatorPair pair, const fp::Dataset &ds, const TrainConfig &cfg,
                         const std::string &run_dir, bool fresh) {
    cfg.validate();
    if (ds.pairs.empty())
        throw ConfigError("train: dataset contains no pairs");
    if (int(ds.header.channels_i) != pair.ij.config().in_channels ||
        int(ds.header.channels_j) != pair.ij.config().out_channels)
        throw ConfigError("train: dataset channel counts do not match the network pair");
    if (!fresh && pair.epochs_done >= uint32_t(cfg.epochs))
        throw ConfigError("train: checkpoint already covers the requested epochs");

    const int n = int(ds.pairs.size());
    const int spe = (n + cfg.batch_size - 1) / cfg.batch_size;
    const uint64_t total_steps = uint64_t(spe) * uint64_t(cfg.epochs);

    Rng shuffle_rng(0);
    if (fresh) {
        pair.train_seed = cfg.seed;
        pair.frequency_i_hz = ds.header.frequency_i_hz;
        pair.frequency_j_hz = ds.header.frequency_j_hz;
        pair.scenario = ds.header.scenario;
        pair.mode = ds.header.mode;
        pair.stats_i = ds.pairs.front().stats_i;
        pair.stats_j = ds.pairs.front().stats_j;
        shuffle_rng = Rng(derive_seed(cfg.seed, {uint64_t(kStreamShuffle)}));
    } else {
        shuffle_rng.set_state(pair.shuffle_state);
    }

    std::ofstream epoch_csv, step_csv;
    std::string ckpt_path;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        ckpt_path = run_dir + "/checkpoint.cfck";
        auto csv_mode = fresh ? std::ios::trunc : std::ios::app;
        epoch_csv.open(run_dir + "/loss_log.csv", csv_mode);
        step_csv.open(run_dir + "/loss_steps.csv", csv_mode);
        if (!epoch_csv || !step_csv)
            throw IoError("train: cannot open loss logs under " + run_dir);
        if (fresh) {
            epoch_csv << kCsvHeader;
            step_csv << kCsvHeader;
            pair.shuffle_state = shuffle_rng.state();
            nn::save_checkpoint(ckpt_path, pair);
        }
    }

    TrainResult result{std::move(pair), {}, {}};
    for (int epoch = int(result.pair.epochs_done) + 1; epoch <= cfg.epochs; epoch++) {
        std::vector<int> order = shuffled_order(n, shuffle_rng);
        EpochAccum acc;
        for (int s = 0; s < spe; s++) {
            int lo = s * cfg.batch_size;
            int hi = std::min(n, lo + cfg.batch_size);
            std::vector<int> idx(order.begin() + lo, order.begin() + hi);
            Tensor<float> x_i = make_batch(ds, idx, true);
            Tensor<float> x_j = make_batch(ds, idx, false);

            uint64_t d = result.pair.adam.steps + 1;
            double weight =
                cfg.use_cycle_loss ? weight_at(cfg.weight_fn, d, total_steps) : 0.0;
            double lr = schedule_lr(cfg, double(d - 1) / double(spe));
            LossBundle b = train_step(result.pair, x_i, x_j, weight, lr);

            if (!std::isfinite(b.joint) || !std::isfinite(b.cycle))
                throw NumericalError(
                    "train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                    std::to_string(s + 1) +
                    (ckpt_path.empty() ? "" : "; last finite state kept at " + ckpt_path));
            result.steps.push_back(b);
            acc.add(b);
            if (step_csv.is_open())
                step_csv << csv_row(epoch, b);
        }
        result.epochs.push_back(acc.mean());
        result.pair.epochs_done = uint32_t(epoch);
        result.pair.shuffle_state = shuffle_rng.state();
        if (epoch_csv.is_open()) {
            epoch_csv << csv_row(epoch, result.epochs.back());
            epoch_csv.flush();
        }
        bool cadence_hit = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
        if (!ckpt_path.empty() && (cadence_hit || epoch == cfg.epochs))
            nn::save_checkpoint(ckpt_path, result.pair);
    }
    return result;
}

} // namespace

double basic_loss(const nn::TranslatorNetwork<float> &net, const Tensor<float> &x_i,
                  const Tensor<float> &x_j) {
    Tensor<float> y = net.forward(x_i);
    return mse(y, x_j);
}

double cycle_loss(const nn::TranslatorNetwork<float> &net_ij,
                  const nn::TranslatorNetwork<float> &net_ji, const Tensor<float> &x_i,
                  const Tensor<float> &x_j) {
    check_pair_compat(net_ij, net_ji);
    Tensor<float> r_i = net_ji.forward(net_ij.forward(x_i));
    Tensor<float> r_j = net_ij.forward(net_ji.forward(x_j));
    return mse(r_i, x_i) + mse(r_j, x_j);
}

nn::Tensor<float> make_batch(const fp::Dataset &ds, const std::vector<int> &indices,
                             bool band_i) {
    const int h = ds.header.image_rows();
    const int w = ds.header.image_cols();
    const int c = int(band_i ? ds.header.channels_i : ds.header.channels_j);
    Tensor<float> t(int(indices.size()), c, h, w);
    for (size_t s = 0; s < indices.size(); s++) {
        if (indices[s] < 0 || indices[s] >= int(ds.pairs.size()))
            throw ConfigError("make_batch: pair index out of range");
        const std::vector<float> &img =
            band_i ? ds.pairs[size_t(indices[s])].img_i : ds.pairs[size_t(indices[s])].img_j;
        for (int y = 0; y < h; y++)
            for (int x = 0; x < w; x++)
                for (int ch = 0; ch < c; ch++)
                    t.at(int(s), ch, y, x) = img[(size_t(y) * w + x) * c + ch] * 2.0f - 1.0f;
    }
    return t;
}

std::vector<float> net_output_to_image(const Tensor<float> &y, int sample) {
    std::vector<float> img(size_t(y.h) * y.w * y.c);
    for (int row = 0; row < y.h; row++)
        for (int col = 0; col < y.w; col++)
            for (int ch = 0; ch < y.c; ch++)
                img[(size_t(row) * y.w + col) * y.c + ch] =
                    (y.at(sample, ch, row, col) + 1.0f) * 0.5f;
    return img;
}

TrainResult train_pair(const fp::Dataset &ds, const nn::ArchitectureConfig &arch_ij,
                       const nn::ArchitectureConfig &arch_ji, const TrainConfig &cfg,
                       const std::string &run_dir) {
    nn::TranslatorPair pair(arch_ij, arch_ji, cfg.seed);
    return run_training(std::move(pair), ds, cfg, run_dir, true);
}

TrainResult resume_pair(nn::TranslatorPair pair, const fp::Dataset &ds, const TrainConfig &cfg,
                        const std::string &run_dir) {
    return run_training(std::move(pair), ds, cfg, run_dir, false);
}

} // namespace cfx::train
