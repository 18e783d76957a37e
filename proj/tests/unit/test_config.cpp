#include "mirage/config.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>

using namespace mirage;

TEST_CASE("key-value parsing handles comments, whitespace, and errors") {
    const KeyValueFile kv = KeyValueFile::parse_text(
        "# top comment\n"
        "  a.b = 1.5  # trailing\n"
        "name = hello\n"
        "flag = true\n"
        "list = 1, 2,3\n"
        "\n");
    CHECK(kv.get_double("a.b", 0.0) == 1.5);
    CHECK(kv.get_string("name", "") == "hello");
    CHECK(kv.get_bool("flag", false));
    CHECK(kv.get_doubles("list", {}) == std::vector<double>{1, 2, 3});
    CHECK(kv.get_double("missing", 7.0) == 7.0);
    CHECK_FALSE(kv.has("missing"));

    CHECK_THROWS_AS(KeyValueFile::parse_text("novalue\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueFile::parse_text(" = 3\n"), ConfigError);
    CHECK_THROWS_AS(kv.get_double("name", 0.0), ConfigError);
    CHECK_THROWS_AS(kv.get_bool("a.b", false), ConfigError);
    CHECK_THROWS_AS(kv.require_string("missing"), ConfigError);
}

TEST_CASE("scenario config: defaults, validation, and round trip") {
    const ScenarioConfig def = ScenarioConfig::defaults(Mission::kGvt);
    CHECK(def.dt == 0.02);
    CHECK(def.camera.width == 1280);
    CHECK(def.camera.height == 720);
    CHECK(def.marker_side == 0.5);
    CHECK(def.attack.s0[kIdxAtt] == 0.01);

    CHECK_THROWS_AS(
        scenario_from_kv(KeyValueFile::parse_text("mission = hover\n")),
        ConfigError);
    CHECK_THROWS_AS(
        scenario_from_kv(KeyValueFile::parse_text("vehicle.mass = -1\n")),
        ConfigError);
    CHECK_THROWS_AS(
        scenario_from_kv(KeyValueFile::parse_text("detectors.pfa = 1.5\n")),
        ConfigError);
    CHECK_THROWS_AS(scenario_from_kv(KeyValueFile::parse_text(
                        "attack.enabled = true\nattack.s0 = "
                        "0,0,0,0,0,0,0,0,0,0,0,0\n")),
                    ConfigError);

    const std::string path =
        (std::filesystem::temp_directory_path() / "mirage_cfg_test.cfg").string();
    ScenarioConfig cfg = def;
    cfg.seed = 77;
    cfg.vehicle.mass = 1.25;
    cfg.attack.enabled = true;
    cfg.attack.alpha = 0.8;
    write_scenario_config(cfg, path);
    const ScenarioConfig back = load_scenario_config(path);
    CHECK(back.seed == 77);
    CHECK(back.vehicle.mass == 1.25);
    CHECK(back.attack.enabled);
    CHECK(back.attack.alpha == 0.8);
    CHECK(back.attack.s0 == cfg.attack.s0);
    std::remove(path.c_str());
}

TEST_CASE("thresholds sidecar io") {
    Thresholds t;
    t.chi2_tau_df12 = 26.21696730810014;
    t.vision_tau = 11.34486673;
    t.cusum_threshold = 14.5;
    t.cusum_drift = 2.0;
    t.recurrent_threshold = 5.2;
    t.recurrent_weights = "weights.bin";
    const std::string path =
        (std::filesystem::temp_directory_path() / "mirage_thr_test.cfg").string();
    write_thresholds(t, path);
    const Thresholds back = load_thresholds(path);
    CHECK(back.chi2_tau_df12 == t.chi2_tau_df12);
    CHECK(back.vision_tau == t.vision_tau);
    CHECK(back.cusum_threshold == t.cusum_threshold);
    CHECK(back.recurrent_threshold == t.recurrent_threshold);
    CHECK(back.recurrent_weights == "weights.bin");
    CHECK(back.has_recurrent());
    std::remove(path.c_str());
}

TEST_CASE("default thresholds come from the quantile oracle") {
    DetectorSettings det;
    det.p_fa = 0.01;
    const Thresholds t = default_thresholds(det);
    CHECK(t.chi2_tau_df12 == doctest::Approx(26.21696731).epsilon(1e-7));
    CHECK(t.vision_tau == doctest::Approx(11.34486673).epsilon(1e-6));
}

TEST_CASE("matched ekf tuning follows the configured noises") {
    const ScenarioConfig cfg = ScenarioConfig::defaults(Mission::kGvt);
    const EkfParams p = cfg.ekf_params();
    CHECK(p.process_noise_cov(0, 0) ==
          doctest::Approx(std::pow(cfg.process_noise_std[0], 2)));
    CHECK(p.measurement_noise_std[0] == cfg.sensor_noise.pos_std);
    CHECK(p.measurement_noise_std[kIdxAtt] == cfg.sensor_noise.att_std);
}
