// SPDX-License-Identifier: Apache-2.0
//
// End-to-end driver tests: exit-code mapping, configuration precedence, and
// the gen / train / eval / sumrate / report workflow on a miniature run.
// The binary under test comes from the CFX_BIN environment variable.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cfx/config.hpp"

using namespace cfx;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out; // stdout and stderr combined
};

const char *cfx_bin() {
    const char *bin = std::getenv("CFX_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "CFX_BIN must point at the cfx binary");
    return bin;
}

CliResult run_cli(const std::string &args, const std::string &env_prefix = "") {
    std::string cmd = env_prefix + "\"" + std::string(cfx_bin()) + "\" " + args + " 2>&1";
    FILE *pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0)
        r.out.append(buf, n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Last whitespace-separated token of the first line containing `key`.
std::string value_of(const std::string &text, const std::string &key) {
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (line.find(key) != std::string::npos) {
            std::istringstream ls(line);
            std::string tok, last;
            while (ls >> tok)
                last = tok;
            return last;
        }
    return "";
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty())
            out.push_back(line);
    return out;
}

bool starts_with(const std::string &s, const std::string &prefix) {
    return s.rfind(prefix, 0) == 0;
}

// Shared miniature workspace. Steps run lazily, each exactly once, so the
// test cases stay independent of execution order.
struct Workspace {
    std::string root, cfg, runs;

    Workspace() {
        root = (fs::temp_directory_path() / "cfx_cli_ws").string();
        fs::remove_all(root);
        fs::create_directories(root);
        runs = root + "/runs";
        cfg = root + "/config.json";
        std::ofstream out(cfg);
        out << "// miniature run configuration exercised by the CLI suite\n"
            << "{\n"
            << "  \"seed\": 11,\n"
            << "  \"output_dir\": \"" << runs << "\",\n"
            << "  \"region\": {\"size_x_m\": 8.0, \"size_y_m\": 8.0,\n"
            << "             \"grid_dx_m\": 2.0, \"grid_dy_m\": 2.0},\n"
            << "  \"trajectory\": {\"num_slots\": 48, \"radius_m\": 0.5},\n"
            << "  \"band_i\": {\"frequency_hz\": 2.0e9, \"antennas_z\": 2, \"antennas_y\": 2},\n"
            << "  \"band_j\": {\"frequency_hz\": 5.0e9, \"antennas_z\": 3, \"antennas_y\": 3},\n"
            << "  \"scene\": {\"scenario\": \"los\"},\n"
            << "  \"dataset\": {\"mode\": \"dft_diag\", \"rho\": 4, \"varrho\": 4,\n"
            << "              \"train_count\": 3, \"test_count\": 2},\n"
            << "  /* translator kept tiny so the whole workflow runs in seconds */\n"
            << "  \"network\": {\"base_width\": 8, \"width_cap\": 8, \"encoder_stages\": 2,\n"
            << "              \"residual_blocks\": 1, \"groupnorm_groups\": 4},\n"
            << "  \"train\": {\"epochs\": 2, \"decay_start_epoch\": 2, \"learning_rate\": 1e-3,\n"
            << "            \"batch_size\": 2, \"weight_fn\": \"f1\"},\n"
            << "  \"sumrate\": {\"users\": 2, \"snr_db\": [0.0, 10.0], \"draws\": 12, \"drops\": 2}\n"
            << "}\n";
    }

    std::string with_cfg(const std::string &args) const {
        return "--config \"" + cfg + "\" " + args;
    }
};

Workspace &ws() {
    static Workspace w;
    return w;
}

void ensure_gen() {
    if (fs::exists(ws().runs + "/data/train.cfds"))
        return;
    CliResult r = run_cli(ws().with_cfg("gen"));
    REQUIRE_MESSAGE(r.code == 0, r.out);
}

void ensure_train() {
    if (fs::exists(ws().runs + "/train/checkpoint.cfck"))
        return;
    ensure_gen();
    CliResult r = run_cli(ws().with_cfg("train"));
    REQUIRE_MESSAGE(r.code == 0, r.out);
}

void ensure_train_no_cycle() {
    if (fs::exists(ws().runs + "/train_nc/checkpoint.cfck"))
        return;
    ensure_gen();
    CliResult r = run_cli(
        ws().with_cfg("train --run \"" + ws().runs + "/train_nc\" --no-cycle-loss"));
    REQUIRE_MESSAGE(r.code == 0, r.out);
}

void ensure_eval() {
    if (fs::exists(ws().runs + "/eval/eval_report.csv"))
        return;
    ensure_train();
    ensure_train_no_cycle();
    CliResult r = run_cli(ws().with_cfg("eval --no-cycle-checkpoint \"" + ws().runs +
                                        "/train_nc/checkpoint.cfck\""));
    REQUIRE_MESSAGE(r.code == 0, r.out);
}

void ensure_sumrate() {
    if (fs::exists(ws().runs + "/sumrate/sumrate.csv"))
        return;
    ensure_train();
    CliResult r = run_cli(ws().with_cfg("sumrate"));
    REQUIRE_MESSAGE(r.code == 0, r.out);
}

} // namespace

TEST_CASE("run configuration serializes, parses, and validates") {
    RunConfig cfg;
    cfg.seed = 42;
    cfg.output_dir = "elsewhere";
    cfg.gen.band_j.antennas_z = 12;
    cfg.train.epochs = 7;
    cfg.sumrate.snr_db = {-5.0, 5.0};
    RunConfig round = parse_config(serialize_config(cfg));
    CHECK(round.seed == 42);
    CHECK(round.output_dir == "elsewhere");
    CHECK(round.gen.band_j.antennas_z == 12);
    CHECK(round.train.epochs == 7);
    CHECK(round.sumrate.snr_db == cfg.sumrate.snr_db);
    // the master seed fans out to the module seeds
    CHECK(round.gen.seed == 42);
    CHECK(round.train.seed == 42);

    // comments and absent keys are fine; defaults fill the gaps
    RunConfig sparse = parse_config("// header\n{ /* nothing set */ \"seed\": 9 }\n");
    CHECK(sparse.seed == 9);
    CHECK(sparse.gen.train_count == 900);

    CHECK_THROWS_AS((void)parse_config("{ not json"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("{\"scene\": {\"scenario\": \"indoor\"}}"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("{\"dataset\": {\"mode\": \"raw\"}}"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("{\"seed\": \"eleven\"}"), ConfigError);
    CHECK_THROWS_AS((void)load_config_file("/nonexistent/config.json"), IoError);

    // image size must stay divisible by the encoder's downsampling factor
    RunConfig bad;
    bad.gen.grid.size_x_m = 6.0; // 3 columns * rho 2 = 6 pixels, not % 16
    bad.gen.grid.size_y_m = 6.0;
    bad.gen.rho = 2;
    bad.gen.varrho = 2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("version, help, and argument errors map to the parse exit code") {
    CliResult version = run_cli("--version");
    CHECK(version.code == 0);
    CHECK(version.out.find("cfx 1.0.0") != std::string::npos);

    CliResult help = run_cli("--help");
    CHECK(help.code == 0);
    for (const char *verb : {"gen", "train", "eval", "sumrate", "report"})
        CHECK_MESSAGE(help.out.find(verb) != std::string::npos, verb);

    CHECK(run_cli("").code == 2);                    // a subcommand is required
    CHECK(run_cli("compress").code == 2);            // unknown verb
    CHECK(run_cli("gen --no-such-flag").code == 2);  // unknown option
    CHECK(run_cli("--threads 0 gen").code == 2);     // fails the positivity check
    CHECK(run_cli("gen --mode sparse").code == 2);   // not in the member list
}

TEST_CASE("gen writes deterministic datasets with manifest hashes") {
    ensure_gen();
    CliResult first = run_cli(ws().with_cfg("gen --out \"" + ws().root + "/gen_a\""));
    REQUIRE_MESSAGE(first.code == 0, first.out);
    CHECK(first.out.find("dataset manifest") != std::string::npos);
    CHECK(fs::exists(ws().root + "/gen_a/train.cfds"));
    CHECK(fs::exists(ws().root + "/gen_a/test.cfds"));
    CHECK(value_of(first.out, "train pairs") == "3");
    CHECK(value_of(first.out, "test pairs") == "2");

    // the same configuration reproduces the same file hashes in a fresh
    // process; a different master seed changes them
    CliResult second = run_cli(ws().with_cfg("gen --out \"" + ws().root + "/gen_b\""));
    REQUIRE(second.code == 0);
    CHECK(value_of(first.out, "train hash") == value_of(second.out, "train hash"));
    CHECK(value_of(first.out, "test hash") == value_of(second.out, "test hash"));

    CliResult reseeded =
        run_cli(ws().with_cfg("--seed 99 gen --out \"" + ws().root + "/gen_c\""));
    REQUIRE(reseeded.code == 0);
    CHECK(value_of(first.out, "train hash") != value_of(reseeded.out, "train hash"));

    // invalid array geometry is rejected before any work happens
    CliResult bad = run_cli(ws().with_cfg("--array-i 0 1 gen"));
    CHECK(bad.code == 2);
    CHECK(bad.out.find("config error") != std::string::npos);
}

TEST_CASE("train writes checkpoints and resumes to the target epoch") {
    ensure_train();
    CliResult fresh = run_cli(ws().with_cfg("train"));
    // a finished run refuses to resume implicitly: rerunning `train` without
    // --resume retrains from scratch, which must succeed and line up
    REQUIRE_MESSAGE(fresh.code == 0, fresh.out);
    CHECK(value_of(fresh.out, "epochs done") == "2");
    CHECK(value_of(fresh.out, "optimizer steps") == "4"); // 3 pairs / batch 2 -> 2 per epoch
    CHECK(fs::exists(ws().runs + "/train/checkpoint.cfck"));
    CHECK(fs::exists(ws().runs + "/train/loss_log.csv"));
    CHECK(fs::exists(ws().runs + "/train/loss_steps.csv"));
    CHECK(starts_with(slurp(ws().runs + "/train/loss_log.csv"),
                      "epoch,basic_ij,basic_ji,cycle,weight,joint,lr"));

    CliResult resumed = run_cli(ws().with_cfg("train --resume --epochs 4"));
    REQUIRE_MESSAGE(resumed.code == 0, resumed.out);
    CHECK(value_of(resumed.out, "epochs done") == "4");
    CHECK(value_of(resumed.out, "optimizer steps") == "8");

    // missing inputs surface as io failures, not crashes
    CHECK(run_cli(ws().with_cfg("train --data \"" + ws().root + "/nowhere\"")).code == 3);
    CHECK(run_cli(ws().with_cfg("train --resume --run \"" + ws().root + "/empty_run\"")).code ==
          3);
}

TEST_CASE("single-thread training reruns are bitwise identical") {
    ensure_gen();
    const std::string run_a = ws().root + "/det_a", run_b = ws().root + "/det_b";
    CliResult a = run_cli(ws().with_cfg("--single-thread train --run \"" + run_a + "\""));
    CliResult b = run_cli(ws().with_cfg("--single-thread train --run \"" + run_b + "\""));
    REQUIRE_MESSAGE(a.code == 0, a.out);
    REQUIRE_MESSAGE(b.code == 0, b.out);
    CHECK(value_of(a.out, "checkpoint hash") == value_of(b.out, "checkpoint hash"));
    CHECK(slurp(run_a + "/checkpoint.cfck") == slurp(run_b + "/checkpoint.cfck"));
    CHECK(slurp(run_a + "/loss_log.csv") == slurp(run_b + "/loss_log.csv"));
}

TEST_CASE("eval writes the comparison table with ablation rows") {
    ensure_eval();
    const std::string csv_path = ws().runs + "/eval/eval_report.csv";
    CHECK(fs::exists(ws().runs + "/eval/eval_report.txt"));
    CHECK(fs::exists(ws().runs + "/eval/nmse_plot.svg"));

    auto lines = lines_of(slurp(csv_path));
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "method,uses_cycle,uses_refine,nmse_ij,nmse_ij_db,nmse_ji,nmse_ji_db");
    CHECK(starts_with(lines[1], "translator,1,1,"));
    CHECK(starts_with(lines[2], "translator_no_cycle,0,1,"));
    CHECK(starts_with(lines[3], "translator_no_refine,1,0,"));
    CHECK(starts_with(lines[4], "linear_baseline,0,1,"));
    CHECK(starts_with(lines[5], "adversarial_gan,n/a"));

    // populated rows carry finite numbers
    for (size_t row = 1; row <= 4; row++) {
        std::istringstream ss(lines[row]);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        REQUIRE(fields.size() == 7);
        for (size_t k = 3; k < 7; k++)
            CHECK(std::isfinite(std::stod(fields[k])));
    }

    // mismatched band geometry is a configuration error
    CliResult bad = run_cli(ws().with_cfg("--array-j 5 5 eval"));
    CHECK(bad.code == 2);
    // a missing checkpoint is an io error
    CliResult gone =
        run_cli(ws().with_cfg("eval --checkpoint \"" + ws().root + "/none.cfck\""));
    CHECK(gone.code == 3);
}

TEST_CASE("sumrate writes rate tables over the SNR grid") {
    ensure_sumrate();
    auto lines = lines_of(slurp(ws().runs + "/sumrate/sumrate.csv"));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "snr_db,perfect_csi,translator,linear_baseline");
    double prev_snr = -1e9;
    for (size_t row = 1; row < lines.size(); row++) {
        std::istringstream ss(lines[row]);
        std::string field;
        std::vector<double> vals;
        while (std::getline(ss, field, ','))
            vals.push_back(std::stod(field));
        REQUIRE(vals.size() == 4);
        CHECK(vals[0] > prev_snr); // SNR points stay sorted
        prev_snr = vals[0];
        for (size_t k = 1; k < 4; k++) {
            CHECK(std::isfinite(vals[k]));
            CHECK(vals[k] > 0.0);
        }
    }
    CHECK(fs::exists(ws().runs + "/sumrate/sumrate.txt"));
    CHECK(fs::exists(ws().runs + "/sumrate/sumrate_plot.svg"));
}

TEST_CASE("report collects run artifacts into one directory") {
    ensure_eval();
    ensure_sumrate();
    CliResult r = run_cli(ws().with_cfg("report"));
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("report written to") != std::string::npos);
    const std::string out = ws().runs + "/report";
    CHECK(fs::exists(out + "/report_sources.txt"));
    CHECK(fs::exists(out + "/eval_report.csv"));
    CHECK(fs::exists(out + "/sumrate.csv"));
    CHECK(fs::exists(out + "/loss_plot.svg"));
    std::string sources = slurp(out + "/report_sources.txt");
    CHECK(sources.find("eval_report.csv") != std::string::npos);
    CHECK(sources.find("sumrate.csv") != std::string::npos);

    // a tree without any run outputs is an io error
    fs::create_directories(ws().root + "/blank");
    CliResult blank = run_cli("report --runs \"" + ws().root + "/blank\"");
    CHECK(blank.code == 3);
}

TEST_CASE("environment variables override directories and thread caps") {
    const std::string env_dir = ws().root + "/env_runs";
    CliResult env_gen =
        run_cli(ws().with_cfg("gen"), "env CFX_OUTPUT_DIR=\"" + env_dir + "\" ");
    REQUIRE_MESSAGE(env_gen.code == 0, env_gen.out);
    CHECK(fs::exists(env_dir + "/data/train.cfds"));

    // an explicit flag beats the environment
    const std::string flag_dir = ws().root + "/flag_runs";
    CliResult flag_gen = run_cli(ws().with_cfg("--output-dir \"" + flag_dir + "\" gen"),
                                 "env CFX_OUTPUT_DIR=\"" + env_dir + "2\" ");
    REQUIRE_MESSAGE(flag_gen.code == 0, flag_gen.out);
    CHECK(fs::exists(flag_dir + "/data/train.cfds"));
    CHECK_FALSE(fs::exists(env_dir + "2/data/train.cfds"));

    CHECK(run_cli(ws().with_cfg("gen"), "env CFX_THREADS=zero ").code == 2);
    CliResult threaded = run_cli(ws().with_cfg("gen --out \"" + ws().root + "/thr\""),
                                 "env CFX_THREADS=2 ");
    CHECK(threaded.code == 0);
}

TEST_CASE("configuration file failures map to exit codes") {
    CHECK(run_cli("--config /nonexistent.json gen").code == 3);

    const std::string bad_json = ws().root + "/broken.json";
    std::ofstream(bad_json) << "{ this is not json\n";
    CHECK(run_cli("--config \"" + bad_json + "\" gen").code == 2);

    const std::string bad_scene = ws().root + "/bad_scene.json";
    std::ofstream(bad_scene) << "{\"scene\": {\"scenario\": \"indoor\"}}\n";
    CliResult r = run_cli("--config \"" + bad_scene + "\" gen");
    CHECK(r.code == 2);
    CHECK(r.out.find("config error") != std::string::npos);
}
