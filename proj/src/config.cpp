// SPDX-License-Identifier: Apache-2.0

#include "cfx/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cfx {

using ordered_json = nlohmann::ordered_json;

namespace {

const char *scenario_name(radio::Scenario s) {
    return s == radio::Scenario::kLos ? "los" : "nlos";
}

radio::Scenario scenario_from_name(const std::string &name) {
    if (name == "los")
        return radio::Scenario::kLos;
    if (name == "nlos")
        return radio::Scenario::kNlos;
    throw ConfigError("config: unknown scenario '" + name + "'");
}

const char *mode_name(fp::PasMode m) {
    return m == fp::PasMode::kEvdSorted ? "evd_sorted" : "dft_diag";
}

fp::PasMode mode_from_name(const std::string &name) {
    if (name == "evd_sorted")
        return fp::PasMode::kEvdSorted;
    if (name == "dft_diag")
        return fp::PasMode::kDftDiag;
    throw ConfigError("config: unknown pas mode '" + name + "'");
}

ordered_json band_to_json(const radio::BandConfig &b) {
    return {{"frequency_hz", b.frequency_hz},
            {"antennas_z", b.antennas_z},
            {"antennas_y", b.antennas_y},
            {"spacing_ratio", b.spacing_ratio}};
}

void band_from_json(const ordered_json &j, radio::BandConfig &b) {
    b.frequency_hz = j.value("frequency_hz", b.frequency_hz);
    b.antennas_z = j.value("antennas_z", b.antennas_z);
    b.antennas_y = j.value("antennas_y", b.antennas_y);
    b.spacing_ratio = j.value("spacing_ratio", b.spacing_ratio);
}

ordered_json config_to_json(const RunConfig &c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["region"] = {{"size_x_m", c.gen.grid.size_x_m},
                   {"size_y_m", c.gen.grid.size_y_m},
                   {"grid_dx_m", c.gen.grid.grid_dx_m},
                   {"grid_dy_m", c.gen.grid.grid_dy_m},
                   {"bs_height_m", c.gen.grid.bs_position[2]},
                   {"ut_height_m", c.gen.grid.ut_height_m}};
    j["trajectory"] = {{"num_slots", c.gen.plan.num_slots},
                       {"radius_m", c.gen.plan.radius_m},
                       {"slot_duration_s", c.gen.plan.slot_duration_s}};
    j["band_i"] = band_to_json(c.gen.band_i);
    j["band_j"] = band_to_json(c.gen.band_j);
    const auto &sp = c.gen.scene_params;
    j["scene"] = {{"scenario", scenario_name(c.gen.scenario)},
                  {"clusters_min", sp.clusters_min},
                  {"clusters_max", sp.clusters_max},
                  {"elevation_min_rad", sp.elevation_min_rad},
                  {"elevation_max_rad", sp.elevation_max_rad},
                  {"azimuth_min_rad", sp.azimuth_min_rad},
                  {"azimuth_max_rad", sp.azimuth_max_rad},
                  {"rice_factor", sp.rice_factor},
                  {"doppler_max_hz", sp.doppler_max_hz},
                  {"attenuation_exponent", sp.attenuation_exponent},
                  {"reference_frequency_hz", sp.reference_frequency_hz}};
    j["dataset"] = {{"mode", mode_name(c.gen.mode)},
                    {"rho", c.gen.rho},
                    {"varrho", c.gen.varrho},
                    {"train_count", c.gen.train_count},
                    {"test_count", c.gen.test_count}};
    j["network"] = {{"base_width", c.base_width},
                    {"width_cap", c.width_cap},
                    {"encoder_stages", c.encoder_stages},
                    {"residual_blocks", c.residual_blocks},
                    {"groupnorm_groups", c.groupnorm_groups}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"decay_start_epoch", c.train.decay_start_epoch},
                  {"learning_rate", c.train.learning_rate},
                  {"batch_size", c.train.batch_size},
                  {"weight_fn", train::weight_kind_name(c.train.weight_fn)},
                  {"use_cycle_loss", c.train.use_cycle_loss},
                  {"use_refine", c.train.use_refine},
                  {"checkpoint_every", c.train.checkpoint_every}};
    j["sumrate"] = {{"users", c.sumrate.users},
                    {"snr_db", c.sumrate.snr_db},
                    {"draws", c.sumrate.draws},
                    {"drops", c.sumrate.drops},
                    {"power_constraint", c.sumrate.power_constraint}};
    return j;
}

RunConfig config_from_json(const ordered_json &j) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("region")) {
        const auto &r = j.at("region");
        c.gen.grid.size_x_m = r.value("size_x_m", c.gen.grid.size_x_m);
        c.gen.grid.size_y_m = r.value("size_y_m", c.gen.grid.size_y_m);
        c.gen.grid.grid_dx_m = r.value("grid_dx_m", c.gen.grid.grid_dx_m);
        c.gen.grid.grid_dy_m = r.value("grid_dy_m", c.gen.grid.grid_dy_m);
        c.gen.grid.bs_position[2] = r.value("bs_height_m", c.gen.grid.bs_position[2]);
        c.gen.grid.ut_height_m = r.value("ut_height_m", c.gen.grid.ut_height_m);
    }
    if (j.contains("trajectory")) {
        const auto &t = j.at("trajectory");
        c.gen.plan.num_slots = t.value("num_slots", c.gen.plan.num_slots);
        c.gen.plan.radius_m = t.value("radius_m", c.gen.plan.radius_m);
        c.gen.plan.slot_duration_s = t.value("slot_duration_s", c.gen.plan.slot_duration_s);
    }
    if (j.contains("band_i"))
        band_from_json(j.at("band_i"), c.gen.band_i);
    if (j.contains("band_j"))
        band_from_json(j.at("band_j"), c.gen.band_j);
    if (j.contains("scene")) {
        const auto &s = j.at("scene");
        c.gen.scenario = scenario_from_name(s.value("scenario", scenario_name(c.gen.scenario)));
        auto &sp = c.gen.scene_params;
        sp.clusters_min = s.value("clusters_min", sp.clusters_min);
        sp.clusters_max = s.value("clusters_max", sp.clusters_max);
        sp.elevation_min_rad = s.value("elevation_min_rad", sp.elevation_min_rad);
        sp.elevation_max_rad = s.value("elevation_max_rad", sp.elevation_max_rad);
        sp.azimuth_min_rad = s.value("azimuth_min_rad", sp.azimuth_min_rad);
        sp.azimuth_max_rad = s.value("azimuth_max_rad", sp.azimuth_max_rad);
        sp.rice_factor = s.value("rice_factor", sp.rice_factor);
        sp.doppler_max_hz = s.value("doppler_max_hz", sp.doppler_max_hz);
        sp.attenuation_exponent = s.value("attenuation_exponent", sp.attenuation_exponent);
        sp.reference_frequency_hz =
            s.value("reference_frequency_hz", sp.reference_frequency_hz);
    }
    if (j.contains("dataset")) {
        const auto &d = j.at("dataset");
        c.gen.mode = mode_from_name(d.value("mode", mode_name(c.gen.mode)));
        c.gen.rho = d.value("rho", c.gen.rho);
        c.gen.varrho = d.value("varrho", c.gen.varrho);
        c.gen.train_count = d.value("train_count", c.gen.train_count);
        c.gen.test_count = d.value("test_count", c.gen.test_count);
    }
    if (j.contains("network")) {
        const auto &n = j.at("network");
        c.base_width = n.value("base_width", c.base_width);
        c.width_cap = n.value("width_cap", c.width_cap);
        c.encoder_stages = n.value("encoder_stages", c.encoder_stages);
        c.residual_blocks = n.value("residual_blocks", c.residual_blocks);
        c.groupnorm_groups = n.value("groupnorm_groups", c.groupnorm_groups);
    }
    if (j.contains("train")) {
        const auto &t = j.at("train");
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.decay_start_epoch = t.value("decay_start_epoch", c.train.decay_start_epoch);
        c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.weight_fn = train::weight_kind_from_name(
            t.value("weight_fn", std::string(train::weight_kind_name(c.train.weight_fn))));
        c.train.use_cycle_loss = t.value("use_cycle_loss", c.train.use_cycle_loss);
        c.train.use_refine = t.value("use_refine", c.train.use_refine);
        c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
    }
    if (j.contains("sumrate")) {
        const auto &s = j.at("sumrate");
        c.sumrate.users = s.value("users", c.sumrate.users);
        c.sumrate.snr_db = s.value("snr_db", c.sumrate.snr_db);
        c.sumrate.draws = s.value("draws", c.sumrate.draws);
        c.sumrate.drops = s.value("drops", c.sumrate.drops);
        c.sumrate.power_constraint = s.value("power_constraint", c.sumrate.power_constraint);
    }
    c.gen.seed = c.seed;
    c.train.seed = c.seed;
    return c;
}

} // namespace

nn::ArchitectureConfig RunConfig::arch_ij() const {
    nn::ArchitectureConfig a;
    a.in_channels = gen.band_i.total_antennas();
    a.out_channels = gen.band_j.total_antennas();
    a.base_width = base_width;
    a.width_cap = width_cap;
    a.encoder_stages = encoder_stages;
    a.decoder_stages = encoder_stages;
    a.residual_blocks = residual_blocks;
    a.groupnorm_groups = groupnorm_groups;
    return a;
}

nn::ArchitectureConfig RunConfig::arch_ji() const {
    nn::ArchitectureConfig a = arch_ij();
    std::swap(a.in_channels, a.out_channels);
    return a;
}

void RunConfig::validate() const {
    gen.validate();
    train.validate();
    arch_ij().validate();
    if (sumrate.users < 1)
        throw ConfigError("config: sum-rate study needs at least one user");
    if (sumrate.draws < 1 || sumrate.drops < 1)
        throw ConfigError("config: sum-rate draws and drops must be positive");
    if (sumrate.snr_db.empty())
        throw ConfigError("config: sum-rate needs at least one SNR point");
    if (!(sumrate.power_constraint > 0.0))
        throw ConfigError("config: power constraint must be positive");
    const int div = 1 << encoder_stages;
    if ((gen.grid.rows() * gen.varrho) % div != 0 || (gen.grid.cols() * gen.rho) % div != 0)
        throw ConfigError("config: image dimensions must be divisible by 2^encoder_stages");
}

std::string serialize_config(const RunConfig &cfg) { return config_to_json(cfg).dump(2) + "\n"; }

RunConfig parse_config(const std::string &json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config: JSON parse failed: ") + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config: invalid field: ") + e.what());
    }
}

RunConfig load_config_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

} // namespace cfx
