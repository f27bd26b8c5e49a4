// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: gen, train, eval, sumrate, and report verbs sharing
// one run configuration. Precedence: built-in defaults, then --config file,
// then the CFX_OUTPUT_DIR / CFX_THREADS environment overrides, then flags.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cfx/common.hpp"
#include "cfx/config.hpp"
#include "cfx/report.hpp"
#include "cfx/sumrate.hpp"
#include "cfx/train.hpp"

namespace {

using namespace cfx;

void print_manifest(const gen::GenManifest &m) {
    std::cout << "dataset manifest\n";
    std::cout << "  seed         " << m.seed << "\n";
    std::cout << "  train pairs  " << m.train_count << "\n";
    std::cout << "  train file   " << m.train_path << "\n";
    std::cout << "  train hash   " << to_hex(m.train_hash) << "\n";
    std::cout << "  test pairs   " << m.test_count << "\n";
    std::cout << "  test file    " << m.test_path << "\n";
    std::cout << "  test hash    " << to_hex(m.test_hash) << "\n";
}

int cmd_gen(const RunConfig &cfg, const std::string &out_dir) {
    cfg.validate();
    print_manifest(gen::generate_datasets(cfg.gen, out_dir));
    return 0;
}

int cmd_train(const RunConfig &cfg, const std::string &data_dir, const std::string &run_dir,
              bool resume) {
    cfg.validate();
    const fp::Dataset ds = fp::read_dataset(data_dir + "/train.cfds");
    train::TrainResult result =
        resume ? train::resume_pair(nn::load_checkpoint(run_dir + "/checkpoint.cfck"), ds,
                                    cfg.train, run_dir)
               : train::train_pair(ds, cfg.arch_ij(), cfg.arch_ji(), cfg.train, run_dir);
    const std::string ckpt = run_dir + "/checkpoint.cfck";
    std::cout << "training run\n";
    std::cout << "  pairs            " << ds.pairs.size() << "\n";
    std::cout << "  epochs done      " << result.pair.epochs_done << "\n";
    std::cout << "  optimizer steps  " << result.pair.adam.steps << "\n";
    if (!result.epochs.empty()) {
        const auto &last = result.epochs.back();
        std::cout << "  final joint loss " << last.joint << "\n";
    }
    std::cout << "  checkpoint       " << ckpt << "\n";
    std::cout << "  checkpoint hash  " << to_hex(hash_file(ckpt)) << "\n";
    std::cout << "  loss log         " << run_dir << "/loss_log.csv\n";
    return 0;
}

void check_dataset_bands(const RunConfig &cfg, const fp::Dataset &ds) {
    if (cfg.gen.band_i.total_antennas() != int(ds.header.channels_i) ||
        cfg.gen.band_j.total_antennas() != int(ds.header.channels_j))
        throw ConfigError("eval: configured arrays do not match the dataset channel counts");
    if (cfg.gen.band_i.frequency_hz != ds.header.frequency_i_hz ||
        cfg.gen.band_j.frequency_hz != ds.header.frequency_j_hz)
        throw ConfigError("eval: configured band frequencies do not match the dataset");
}

int cmd_eval(const RunConfig &cfg, const std::string &ckpt_path, const std::string &data_dir,
             const std::string &out_dir, const std::string &no_cycle_ckpt) {
    const nn::TranslatorPair pair = nn::load_checkpoint(ckpt_path);
    const fp::Dataset test = fp::read_dataset(data_dir + "/test.cfds");
    check_dataset_bands(cfg, test);

    std::vector<eval::EvalReport> rows;
    rows.push_back(eval::eval_pipeline(pair, test, true, "translator"));
    rows.push_back(eval::eval_pipeline(pair, test, false, "translator_no_refine"));
    if (!no_cycle_ckpt.empty()) {
        const nn::TranslatorPair ablated = nn::load_checkpoint(no_cycle_ckpt);
        eval::EvalReport row = eval::eval_pipeline(ablated, test, true, "translator_no_cycle");
        row.used_cycle = false;
        rows.push_back(std::move(row));
    }
    rows.push_back(eval::eval_linear_baseline(test, cfg.gen.band_i, cfg.gen.band_j));

    report::write_eval_outputs(out_dir, rows);
    std::cout << report::format_eval_text(rows);
    std::cout << "eval report written to " << out_dir << "\n";
    return 0;
}

int cmd_sumrate(RunConfig cfg, const std::string &ckpt_path, const std::string &out_dir) {
    const nn::TranslatorPair pair = nn::load_checkpoint(ckpt_path);
    // The study synthesizes fresh scenes; build them the way the
    // checkpoint's training data was built.
    cfg.gen.mode = pair.mode;
    cfg.gen.scenario = pair.scenario;
    const eval::SumRateStudy study = eval::run_sumrate_study(pair, cfg);
    report::write_sumrate_outputs(out_dir, study);
    std::cout << report::format_sumrate_text(study);
    std::cout << "sum-rate tables written to " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::string &runs_dir, const std::string &out_dir) {
    report::render_report(runs_dir, out_dir);
    std::cout << "report written to " << out_dir << "\n";
    return 0;
}

// Fills `value` only when the option was actually passed.
template <typename T> void apply(const CLI::Option *opt, T &dst, const T &src) {
    if (opt && opt->count() > 0)
        dst = src;
}

int run(int argc, char **argv) {
    CLI::App app{"Multi-band channel fingerprint toolkit: surrogate dataset synthesis, "
                 "cycle-consistent translator training, and downlink evaluation."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cfx 1.0.0");

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration (// comments allowed)");

    uint64_t seed = 0;
    auto *seed_opt = app.add_option("--seed", seed, "master seed for every derived stream");
    std::string output_dir;
    auto *out_opt = app.add_option("--output-dir", output_dir, "base directory for artifacts");
    int threads = 0;
    auto *threads_opt =
        app.add_option("--threads", threads, "worker thread cap")->check(CLI::PositiveNumber);
    bool single_thread = false;
    app.add_flag("--single-thread", single_thread,
                 "force one worker thread (bitwise-reproducible training)");

    double freq_i = 0, freq_j = 0;
    auto *freq_i_opt = app.add_option("--freq-i-hz", freq_i, "source band carrier frequency");
    auto *freq_j_opt = app.add_option("--freq-j-hz", freq_j, "target band carrier frequency");
    std::vector<int> array_i, array_j;
    auto *array_i_opt = app.add_option("--array-i", array_i, "source band antennas: Z Y")
                            ->expected(2);
    auto *array_j_opt = app.add_option("--array-j", array_j, "target band antennas: Z Y")
                            ->expected(2);

    int base_width = 0, width_cap = 0, encoder_stages = 0, residual_blocks = 0, gn_groups = 0;
    auto *bw_opt = app.add_option("--base-width", base_width, "translator stem width");
    auto *wc_opt = app.add_option("--width-cap", width_cap, "maximum encoder width");
    auto *es_opt = app.add_option("--encoder-stages", encoder_stages, "downsampling stages");
    auto *rb_opt = app.add_option("--residual-blocks", residual_blocks, "bottleneck depth");
    auto *gg_opt = app.add_option("--gn-groups", gn_groups, "group-normalization groups");

    // gen
    auto *sub_gen = app.add_subcommand("gen", "synthesize the paired fingerprint datasets");
    std::string gen_out;
    sub_gen->add_option("--out", gen_out, "dataset directory (default <output-dir>/data)");
    int train_count = 0, test_count = 0, rho = 0, varrho = 0;
    auto *tc_opt = sub_gen->add_option("--train-count", train_count, "training pairs");
    auto *sc_opt = sub_gen->add_option("--test-count", test_count, "held-out pairs");
    auto *rho_opt = sub_gen->add_option("--rho", rho, "horizontal pixel replication");
    auto *varrho_opt = sub_gen->add_option("--varrho", varrho, "vertical pixel replication");
    std::string mode_name, scenario_name;
    auto *mode_opt = sub_gen->add_option("--mode", mode_name, "pas mode: evd_sorted | dft_diag")
                         ->check(CLI::IsMember({"evd_sorted", "dft_diag"}));
    auto *scen_opt = sub_gen->add_option("--scenario", scenario_name, "los | nlos")
                         ->check(CLI::IsMember({"los", "nlos"}));

    // train
    auto *sub_train = app.add_subcommand("train", "train the translator pair");
    std::string train_data, train_run;
    sub_train->add_option("--data", train_data, "dataset directory (default <output-dir>/data)");
    sub_train->add_option("--run", train_run, "run directory (default <output-dir>/train)");
    bool resume = false;
    sub_train->add_flag("--resume", resume, "continue from the run directory's checkpoint");
    int epochs = 0, decay_start = 0, batch_size = 0, ckpt_every = 0;
    double lr = 0;
    auto *ep_opt = sub_train->add_option("--epochs", epochs, "total training epochs");
    auto *ds_opt = sub_train->add_option("--decay-start", decay_start,
                                         "epoch where the linear lr decay begins");
    auto *lr_opt = sub_train->add_option("--lr", lr, "Adam learning rate");
    auto *bs_opt = sub_train->add_option("--batch-size", batch_size, "pairs per step");
    auto *ce_opt = sub_train->add_option("--checkpoint-every", ckpt_every,
                                         "checkpoint cadence in epochs");
    std::string weight_fn;
    auto *wf_opt = sub_train->add_option("--weight-fn", weight_fn,
                                         "cycle weight schedule f0..f6 or zero");
    bool no_cycle = false;
    sub_train->add_flag("--no-cycle-loss", no_cycle,
                        "drop the cycle term (weight logged as zero)");

    // eval
    auto *sub_eval = app.add_subcommand("eval", "score extrapolation NMSE on the test split");
    std::string eval_ckpt, eval_data, eval_out, eval_no_cycle_ckpt;
    sub_eval->add_option("--checkpoint", eval_ckpt,
                         "trained pair (default <output-dir>/train/checkpoint.cfck)");
    sub_eval->add_option("--data", eval_data, "dataset directory (default <output-dir>/data)");
    sub_eval->add_option("--out", eval_out, "report directory (default <output-dir>/eval)");
    sub_eval->add_option("--no-cycle-checkpoint", eval_no_cycle_ckpt,
                         "checkpoint trained without the cycle term, added as an ablation row");

    // sumrate
    auto *sub_rate = app.add_subcommand("sumrate", "multi-user downlink sum-rate study");
    std::string rate_ckpt, rate_out;
    sub_rate->add_option("--checkpoint", rate_ckpt,
                         "trained pair (default <output-dir>/train/checkpoint.cfck)");
    sub_rate->add_option("--out", rate_out, "table directory (default <output-dir>/sumrate)");
    int users = 0, draws = 0, drops = 0;
    auto *users_opt = sub_rate->add_option("--users", users, "simultaneous users");
    auto *draws_opt = sub_rate->add_option("--draws", draws, "channel draws per placement");
    auto *drops_opt = sub_rate->add_option("--drops", drops, "user placements per SNR point");
    std::vector<double> snr_db;
    auto *snr_opt = sub_rate->add_option("--snr-db", snr_db, "SNR grid in dB");
    double power = 0;
    auto *power_opt = sub_rate->add_option("--power", power, "total transmit power");

    // report
    auto *sub_report = app.add_subcommand("report", "combine run outputs into tables and plots");
    std::string report_runs, report_out;
    sub_report->add_option("--runs", report_runs, "directory tree to scan (default <output-dir>)");
    sub_report->add_option("--out", report_out, "report directory (default <runs>/report)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    RunConfig cfg;
    if (!config_path.empty())
        cfg = load_config_file(config_path);

    // Environment overrides, deliberately limited to these two knobs.
    if (const char *env = std::getenv("CFX_OUTPUT_DIR"); env && *env)
        cfg.output_dir = env;
    if (const char *env = std::getenv("CFX_THREADS"); env && *env) {
        const int n = std::atoi(env);
        if (n < 1)
            throw ConfigError("CFX_THREADS must be a positive integer");
        set_max_threads(n);
    }

    apply(seed_opt, cfg.seed, seed);
    apply(out_opt, cfg.output_dir, output_dir);
    apply(freq_i_opt, cfg.gen.band_i.frequency_hz, freq_i);
    apply(freq_j_opt, cfg.gen.band_j.frequency_hz, freq_j);
    if (array_i_opt->count() > 0) {
        cfg.gen.band_i.antennas_z = array_i[0];
        cfg.gen.band_i.antennas_y = array_i[1];
    }
    if (array_j_opt->count() > 0) {
        cfg.gen.band_j.antennas_z = array_j[0];
        cfg.gen.band_j.antennas_y = array_j[1];
    }
    apply(bw_opt, cfg.base_width, base_width);
    apply(wc_opt, cfg.width_cap, width_cap);
    apply(es_opt, cfg.encoder_stages, encoder_stages);
    apply(rb_opt, cfg.residual_blocks, residual_blocks);
    apply(gg_opt, cfg.groupnorm_groups, gn_groups);
    apply(tc_opt, cfg.gen.train_count, train_count);
    apply(sc_opt, cfg.gen.test_count, test_count);
    apply(rho_opt, cfg.gen.rho, rho);
    apply(varrho_opt, cfg.gen.varrho, varrho);
    if (mode_opt->count() > 0)
        cfg.gen.mode = mode_name == "evd_sorted" ? fp::PasMode::kEvdSorted : fp::PasMode::kDftDiag;
    if (scen_opt->count() > 0)
        cfg.gen.scenario =
            scenario_name == "los" ? radio::Scenario::kLos : radio::Scenario::kNlos;
    apply(ep_opt, cfg.train.epochs, epochs);
    apply(ds_opt, cfg.train.decay_start_epoch, decay_start);
    apply(lr_opt, cfg.train.learning_rate, lr);
    apply(bs_opt, cfg.train.batch_size, batch_size);
    apply(ce_opt, cfg.train.checkpoint_every, ckpt_every);
    if (wf_opt->count() > 0)
        cfg.train.weight_fn = train::weight_kind_from_name(weight_fn);
    if (no_cycle) {
        cfg.train.use_cycle_loss = false;
        cfg.train.weight_fn = train::WeightKind::kZero;
    }
    apply(users_opt, cfg.sumrate.users, users);
    apply(draws_opt, cfg.sumrate.draws, draws);
    apply(drops_opt, cfg.sumrate.drops, drops);
    if (snr_opt->count() > 0)
        cfg.sumrate.snr_db = snr_db;
    apply(power_opt, cfg.sumrate.power_constraint, power);

    // Flags load after the environment, and the explicit flag wins over both.
    if (threads_opt->count() > 0)
        set_max_threads(threads);
    if (single_thread)
        set_max_threads(1);

    // Seed edits propagate into the nested module seeds, mirroring the
    // config-file rule.
    cfg.gen.seed = cfg.seed;
    cfg.train.seed = cfg.seed;

    const std::string base = cfg.output_dir;
    if (sub_gen->parsed())
        return cmd_gen(cfg, gen_out.empty() ? base + "/data" : gen_out);
    if (sub_train->parsed())
        return cmd_train(cfg, train_data.empty() ? base + "/data" : train_data,
                         train_run.empty() ? base + "/train" : train_run, resume);
    if (sub_eval->parsed())
        return cmd_eval(cfg,
                        eval_ckpt.empty() ? base + "/train/checkpoint.cfck" : eval_ckpt,
                        eval_data.empty() ? base + "/data" : eval_data,
                        eval_out.empty() ? base + "/eval" : eval_out, eval_no_cycle_ckpt);
    if (sub_rate->parsed())
        return cmd_sumrate(cfg,
                           rate_ckpt.empty() ? base + "/train/checkpoint.cfck" : rate_ckpt,
                           rate_out.empty() ? base + "/sumrate" : rate_out);
    if (sub_report->parsed()) {
        const std::string runs = report_runs.empty() ? base : report_runs;
        return cmd_report(runs, report_out.empty() ? runs + "/report" : report_out);
    }
    return 2;
}

} // namespace

int main(int argc, char **argv) {
    try {
        return run(argc, argv);
    } catch (const cfx::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cfx::IoError &e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const cfx::NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
