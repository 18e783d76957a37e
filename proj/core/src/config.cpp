#include "mirage/config.hpp"

#include "mirage/detectors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace mirage {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

KeyValueFile KeyValueFile::parse_text(const std::string& text,
                                      const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": empty key");
        }
        kv.entries_[key] = value;
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const {
    return entries_.count(key) > 0;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::string KeyValueFile::require_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return it->second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key '" + key + "' is not a number: " +
                          it->second);
    }
}

long KeyValueFile::get_long(const std::string& key, long fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key '" + key + "' is not an integer: " +
                          it->second);
    }
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: " +
                      it->second);
}

std::vector<double> KeyValueFile::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key '" + key +
                              "' has a non-numeric element: " + tok);
        }
    }
    return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

void KeyValueFile::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
    if (!out) throw IoError("write failed: " + path);
}

EkfParams ScenarioConfig::ekf_params() const {
    EkfParams p;
    p.process_noise_cov =
        process_noise_std.array().square().matrix().asDiagonal();
    p.measurement_noise_std = sensor_noise.channel_stds();
    Vec12 p0;
    p0.segment<3>(kIdxPos).setConstant(sensor_noise.pos_std * sensor_noise.pos_std);
    p0.segment<3>(kIdxVel).setConstant(sensor_noise.vel_std * sensor_noise.vel_std);
    p0.segment<3>(kIdxAtt).setConstant(sensor_noise.att_std * sensor_noise.att_std);
    p0.segment<3>(kIdxRate).setConstant(sensor_noise.rate_std * sensor_noise.rate_std);
    p.initial_cov_diag = p0;
    return p;
}

ScenarioConfig ScenarioConfig::defaults(Mission mission) {
    ScenarioConfig cfg;
    cfg.mission = mission;
    cfg.duration = mission == Mission::kGvt ? 40.0 : 60.0;
    Vec12 pn;
    pn.segment<3>(kIdxPos).setConstant(0.001);
    pn.segment<3>(kIdxVel).setConstant(0.004);
    pn.segment<3>(kIdxAtt).setConstant(0.0003);
    pn.segment<3>(kIdxRate).setConstant(0.002);
    cfg.process_noise_std = pn;
    cfg.vision.tracker.meas_std = 0.03;
    cfg.vision.tracker.accel_psd = 12.0;
    cfg.vision.tracker.cap_pos_std = 0.05;
    cfg.vision.tracker.cap_vel_std = 0.5;
    cfg.attack.s0 = Vec12::Zero();
    cfg.attack.s0[kIdxAtt] = 0.01;  // roll channel
    return cfg;
}

namespace {

Vec12 vec12_from(const std::vector<double>& v, const std::string& key) {
    if (v.size() != 12) {
        throw ConfigError("key '" + key + "' must have 12 elements");
    }
    Vec12 out;
    for (int i = 0; i < 12; ++i) out[i] = v[static_cast<size_t>(i)];
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ScenarioConfig scenario_from_kv(const KeyValueFile& kv) {
    const std::string mission_name = kv.get_string("mission", "gvt");
    Mission mission;
    if (mission_name == "gvt") {
        mission = Mission::kGvt;
    } else if (mission_name == "vtol") {
        mission = Mission::kVtol;
    } else {
        throw ConfigError("mission must be 'gvt' or 'vtol', got '" +
                          mission_name + "'");
    }

    ScenarioConfig cfg = ScenarioConfig::defaults(mission);
    cfg.dt = kv.get_double("dt", cfg.dt);
    cfg.duration = kv.get_double("duration", cfg.duration);
    cfg.seed = static_cast<std::uint64_t>(kv.get_long("seed", 1));
    if (cfg.dt <= 0.0) throw ConfigError("dt must be positive");
    if (cfg.duration <= 0.0) throw ConfigError("duration must be positive");

    auto& veh = cfg.vehicle;
    veh.mass = kv.get_double("vehicle.mass", veh.mass);
    veh.arm_length = kv.get_double("vehicle.arm_length", veh.arm_length);
    veh.thrust_coeff = kv.get_double("vehicle.thrust_coeff", veh.thrust_coeff);
    veh.drag_coeff = kv.get_double("vehicle.drag_coeff", veh.drag_coeff);
    veh.inertia_xx = kv.get_double("vehicle.inertia_xx", veh.inertia_xx);
    veh.inertia_yy = kv.get_double("vehicle.inertia_yy", veh.inertia_yy);
    veh.inertia_zz = kv.get_double("vehicle.inertia_zz", veh.inertia_zz);
    veh.gravity = kv.get_double("vehicle.gravity", veh.gravity);
    veh.w_sq_max = kv.get_double("vehicle.w_sq_max", veh.w_sq_max);
    veh.pitch_max = kv.get_double("vehicle.pitch_max", veh.pitch_max);
    for (double v : {veh.mass, veh.arm_length, veh.thrust_coeff, veh.drag_coeff,
                     veh.inertia_xx, veh.inertia_yy, veh.inertia_zz, veh.gravity,
                     veh.w_sq_max}) {
        if (v <= 0.0) throw ConfigError("vehicle parameters must be positive");
    }

    auto& sn = cfg.sensor_noise;
    sn.pos_std = kv.get_double("sensor_noise.pos", sn.pos_std);
    sn.vel_std = kv.get_double("sensor_noise.vel", sn.vel_std);
    sn.att_std = kv.get_double("sensor_noise.att", sn.att_std);
    sn.rate_std = kv.get_double("sensor_noise.rate", sn.rate_std);
    for (double v : {sn.pos_std, sn.vel_std, sn.att_std, sn.rate_std}) {
        if (v <= 0.0) throw ConfigError("sensor noise stds must be positive");
    }

    Vec12 pn = cfg.process_noise_std;
    pn.segment<3>(kIdxPos).setConstant(kv.get_double("process_noise.pos", pn[kIdxPos]));
    pn.segment<3>(kIdxVel).setConstant(kv.get_double("process_noise.vel", pn[kIdxVel]));
    pn.segment<3>(kIdxAtt).setConstant(kv.get_double("process_noise.att", pn[kIdxAtt]));
    pn.segment<3>(kIdxRate).setConstant(kv.get_double("process_noise.rate", pn[kIdxRate]));
    cfg.process_noise_std = pn;

    cfg.camera.focal_px = kv.get_double("camera.focal_px", cfg.camera.focal_px);
    cfg.camera.width = static_cast<int>(kv.get_long("camera.width", cfg.camera.width));
    cfg.camera.height = static_cast<int>(kv.get_long("camera.height", cfg.camera.height));
    if (cfg.camera.focal_px <= 0.0 || cfg.camera.width <= 0 ||
        cfg.camera.height <= 0) {
        throw ConfigError("camera parameters must be positive");
    }
    cfg.camera_noise.center_jitter_px =
        kv.get_double("camera.center_jitter_px", cfg.camera_noise.center_jitter_px);
    cfg.camera_noise.side_jitter_px =
        kv.get_double("camera.side_jitter_px", cfg.camera_noise.side_jitter_px);
    if (cfg.camera_noise.center_jitter_px < 0.0 ||
        cfg.camera_noise.side_jitter_px < 0.0) {
        throw ConfigError("camera jitter must be non-negative");
    }
    cfg.marker_side = kv.get_double("marker.side", cfg.marker_side);
    if (cfg.marker_side <= 0.0) throw ConfigError("marker.side must be positive");

    cfg.ground_vehicle.side = kv.get_double("ground_vehicle.side", cfg.ground_vehicle.side);
    cfg.ground_vehicle.speed = kv.get_double("ground_vehicle.speed", cfg.ground_vehicle.speed);
    cfg.ground_vehicle.origin.x() = kv.get_double("ground_vehicle.origin_x", 0.0);
    cfg.ground_vehicle.origin.y() = kv.get_double("ground_vehicle.origin_y", 0.0);
    if (cfg.ground_vehicle.speed <= 0.0 || cfg.ground_vehicle.side <= 0.0) {
        throw ConfigError("ground vehicle side and speed must be positive");
    }

    const std::vector<double> start = kv.get_doubles(
        "drone.start",
        {cfg.drone_start.x(), cfg.drone_start.y(), cfg.drone_start.z()});
    if (start.size() != 3) throw ConfigError("drone.start must have 3 elements");
    cfg.drone_start = Vec3{start[0], start[1], start[2]};

    auto& mp = cfg.mission_params;
    mp.cruise_alt = kv.get_double("mission.cruise_alt", mp.cruise_alt);
    mp.ascent_rate = kv.get_double("mission.ascent_rate", mp.ascent_rate);
    mp.descent_rate = kv.get_double("mission.descent_rate", mp.descent_rate);
    mp.land_rate = kv.get_double("mission.land_rate", mp.land_rate);
    mp.land_threshold = kv.get_double("mission.land_threshold", mp.land_threshold);
    mp.cruise_band = kv.get_double("mission.cruise_band", mp.cruise_band);
    mp.touchdown_alt = kv.get_double("mission.touchdown_alt", mp.touchdown_alt);

    auto& g = cfg.gains;
    g.pos_kp = kv.get_double("gains.pos_kp", g.pos_kp);
    g.vel_kp = kv.get_double("gains.vel_kp", g.vel_kp);
    g.vel_ki = kv.get_double("gains.vel_ki", g.vel_ki);
    g.vel_integral_max = kv.get_double("gains.vel_integral_max", g.vel_integral_max);
    g.att_kp = kv.get_double("gains.att_kp", g.att_kp);
    g.rate_kp = kv.get_double("gains.rate_kp", g.rate_kp);
    g.vel_max = kv.get_double("gains.vel_max", g.vel_max);
    g.accel_max = kv.get_double("gains.accel_max", g.accel_max);
    g.tilt_max = kv.get_double("gains.tilt_max", g.tilt_max);

    cfg.vision.noise_floor = kv.get_double("vision.noise_floor", cfg.vision.noise_floor);
    cfg.vision.gate_quantile = kv.get_double("vision.gate_quantile", cfg.vision.gate_quantile);
    cfg.vision.tracker.meas_std = kv.get_double("tracker.meas_std", cfg.vision.tracker.meas_std);
    cfg.vision.tracker.accel_psd = kv.get_double("tracker.accel_psd", cfg.vision.tracker.accel_psd);
    cfg.vision.tracker.cap_pos_std = kv.get_double("tracker.cap_pos", cfg.vision.tracker.cap_pos_std);
    cfg.vision.tracker.cap_vel_std = kv.get_double("tracker.cap_vel", cfg.vision.tracker.cap_vel_std);

    auto& det = cfg.detectors;
    det.p_fa = kv.get_double("detectors.pfa", det.p_fa);
    if (det.p_fa <= 0.0 || det.p_fa >= 1.0) {
        throw ConfigError("detectors.pfa must be in (0, 1)");
    }
    det.epsilon = kv.get_double("detectors.epsilon", det.epsilon);
    det.chi2 = kv.get_bool("detectors.chi2", det.chi2);
    det.cusum = kv.get_bool("detectors.cusum", det.cusum);
    det.cusum_drift = kv.get_double("detectors.cusum_drift", det.cusum_drift);
    det.recurrent = kv.get_bool("detectors.recurrent", det.recurrent);

    auto& atk = cfg.attack;
    atk.enabled = kv.get_bool("attack.enabled", atk.enabled);
    const std::string mode = kv.get_string("attack.mode", "consistent");
    if (mode == "consistent") {
        atk.mode = AttackMode::kConsistent;
    } else if (mode == "image_only") {
        atk.mode = AttackMode::kImageOnly;
    } else {
        throw ConfigError("attack.mode must be 'consistent' or 'image_only'");
    }
    if (kv.has("attack.s0")) {
        atk.s0 = vec12_from(kv.get_doubles("attack.s0", {}), "attack.s0");
    }
    atk.alpha = kv.get_double("attack.alpha", atk.alpha);
    if (atk.alpha <= 0.0) throw ConfigError("attack.alpha must be positive");
    const std::vector<double> dir = kv.get_doubles(
        "attack.offset_dir", {atk.image_offset_dir.x(), atk.image_offset_dir.y(),
                              atk.image_offset_dir.z()});
    if (dir.size() != 3) throw ConfigError("attack.offset_dir must have 3 elements");
    atk.image_offset_dir = Vec3{dir[0], dir[1], dir[2]};
    const std::string stop = kv.get_string("attack.stop", "marker_exit");
    if (stop == "marker_exit") {
        atk.stop_rule = StopRule::kMarkerExit;
    } else if (stop == "step_limit") {
        atk.stop_rule = StopRule::kStepLimit;
    } else {
        throw ConfigError("attack.stop must be 'marker_exit' or 'step_limit'");
    }
    atk.max_attack_steps = static_cast<int>(kv.get_long("attack.max_steps", atk.max_attack_steps));
    atk.marker_lost_patience = static_cast<int>(
        kv.get_long("attack.marker_lost_patience", atk.marker_lost_patience));
    atk.trigger_radius = kv.get_double("attack.trigger_radius", atk.trigger_radius);
    atk.trigger_hold = static_cast<int>(
        kv.get_long("attack.trigger_hold", atk.trigger_hold));
    if (atk.enabled && atk.mode == AttackMode::kConsistent &&
        atk.s0.norm() == 0.0) {
        throw ConfigError("attack.s0 must be nonzero for an enabled attack");
    }

    cfg.thresholds_file = kv.get_string("thresholds_file", "");
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    return scenario_from_kv(KeyValueFile::parse_file(path));
}

void write_scenario_config(const ScenarioConfig& cfg, const std::string& path) {
    KeyValueFile kv;
    kv.set("mission", cfg.mission == Mission::kGvt ? "gvt" : "vtol");
    kv.set("dt", format_double(cfg.dt));
    kv.set("duration", format_double(cfg.duration));
    kv.set("seed", std::to_string(cfg.seed));

    kv.set("vehicle.mass", format_double(cfg.vehicle.mass));
    kv.set("vehicle.arm_length", format_double(cfg.vehicle.arm_length));
    kv.set("vehicle.thrust_coeff", format_double(cfg.vehicle.thrust_coeff));
    kv.set("vehicle.drag_coeff", format_double(cfg.vehicle.drag_coeff));
    kv.set("vehicle.inertia_xx", format_double(cfg.vehicle.inertia_xx));
    kv.set("vehicle.inertia_yy", format_double(cfg.vehicle.inertia_yy));
    kv.set("vehicle.inertia_zz", format_double(cfg.vehicle.inertia_zz));
    kv.set("vehicle.gravity", format_double(cfg.vehicle.gravity));
    kv.set("vehicle.w_sq_max", format_double(cfg.vehicle.w_sq_max));
    kv.set("vehicle.pitch_max", format_double(cfg.vehicle.pitch_max));

    kv.set("sensor_noise.pos", format_double(cfg.sensor_noise.pos_std));
    kv.set("sensor_noise.vel", format_double(cfg.sensor_noise.vel_std));
    kv.set("sensor_noise.att", format_double(cfg.sensor_noise.att_std));
    kv.set("sensor_noise.rate", format_double(cfg.sensor_noise.rate_std));

    kv.set("process_noise.pos", format_double(cfg.process_noise_std[kIdxPos]));
    kv.set("process_noise.vel", format_double(cfg.process_noise_std[kIdxVel]));
    kv.set("process_noise.att", format_double(cfg.process_noise_std[kIdxAtt]));
    kv.set("process_noise.rate", format_double(cfg.process_noise_std[kIdxRate]));

    kv.set("camera.focal_px", format_double(cfg.camera.focal_px));
    kv.set("camera.center_jitter_px", format_double(cfg.camera_noise.center_jitter_px));
    kv.set("camera.side_jitter_px", format_double(cfg.camera_noise.side_jitter_px));
    kv.set("camera.width", std::to_string(cfg.camera.width));
    kv.set("camera.height", std::to_string(cfg.camera.height));
    kv.set("marker.side", format_double(cfg.marker_side));

    kv.set("ground_vehicle.side", format_double(cfg.ground_vehicle.side));
    kv.set("ground_vehicle.speed", format_double(cfg.ground_vehicle.speed));
    kv.set("ground_vehicle.origin_x", format_double(cfg.ground_vehicle.origin.x()));
    kv.set("ground_vehicle.origin_y", format_double(cfg.ground_vehicle.origin.y()));

    kv.set("drone.start", format_double(cfg.drone_start.x()) + "," +
                              format_double(cfg.drone_start.y()) + "," +
                              format_double(cfg.drone_start.z()));

    kv.set("mission.cruise_alt", format_double(cfg.mission_params.cruise_alt));
    kv.set("mission.ascent_rate", format_double(cfg.mission_params.ascent_rate));
    kv.set("mission.descent_rate", format_double(cfg.mission_params.descent_rate));
    kv.set("mission.land_rate", format_double(cfg.mission_params.land_rate));
    kv.set("mission.land_threshold", format_double(cfg.mission_params.land_threshold));
    kv.set("mission.cruise_band", format_double(cfg.mission_params.cruise_band));
    kv.set("mission.touchdown_alt", format_double(cfg.mission_params.touchdown_alt));

    kv.set("gains.pos_kp", format_double(cfg.gains.pos_kp));
    kv.set("gains.vel_kp", format_double(cfg.gains.vel_kp));
    kv.set("gains.vel_ki", format_double(cfg.gains.vel_ki));
    kv.set("gains.vel_integral_max", format_double(cfg.gains.vel_integral_max));
    kv.set("gains.att_kp", format_double(cfg.gains.att_kp));
    kv.set("gains.rate_kp", format_double(cfg.gains.rate_kp));
    kv.set("gains.vel_max", format_double(cfg.gains.vel_max));
    kv.set("gains.accel_max", format_double(cfg.gains.accel_max));
    kv.set("gains.tilt_max", format_double(cfg.gains.tilt_max));

    kv.set("vision.noise_floor", format_double(cfg.vision.noise_floor));
    kv.set("vision.gate_quantile", format_double(cfg.vision.gate_quantile));
    kv.set("tracker.meas_std", format_double(cfg.vision.tracker.meas_std));
    kv.set("tracker.accel_psd", format_double(cfg.vision.tracker.accel_psd));
    kv.set("tracker.cap_pos", format_double(cfg.vision.tracker.cap_pos_std));
    kv.set("tracker.cap_vel", format_double(cfg.vision.tracker.cap_vel_std));

    kv.set("detectors.pfa", format_double(cfg.detectors.p_fa));
    kv.set("detectors.epsilon", format_double(cfg.detectors.epsilon));
    kv.set("detectors.chi2", cfg.detectors.chi2 ? "true" : "false");
    kv.set("detectors.cusum", cfg.detectors.cusum ? "true" : "false");
    kv.set("detectors.cusum_drift", format_double(cfg.detectors.cusum_drift));
    kv.set("detectors.recurrent", cfg.detectors.recurrent ? "true" : "false");

    kv.set("attack.enabled", cfg.attack.enabled ? "true" : "false");
    kv.set("attack.mode", cfg.attack.mode == AttackMode::kConsistent
                              ? "consistent"
                              : "image_only");
    std::string s0;
    for (int i = 0; i < 12; ++i) {
        s0 += format_double(cfg.attack.s0[i]);
        if (i != 11) s0 += ",";
    }
    kv.set("attack.s0", s0);
    kv.set("attack.alpha", format_double(cfg.attack.alpha));
    kv.set("attack.offset_dir",
           format_double(cfg.attack.image_offset_dir.x()) + "," +
               format_double(cfg.attack.image_offset_dir.y()) + "," +
               format_double(cfg.attack.image_offset_dir.z()));
    kv.set("attack.stop", cfg.attack.stop_rule == StopRule::kMarkerExit
                              ? "marker_exit"
                              : "step_limit");
    kv.set("attack.max_steps", std::to_string(cfg.attack.max_attack_steps));
    kv.set("attack.marker_lost_patience",
           std::to_string(cfg.attack.marker_lost_patience));
    kv.set("attack.trigger_radius", format_double(cfg.attack.trigger_radius));
    kv.set("attack.trigger_hold", std::to_string(cfg.attack.trigger_hold));
    if (!cfg.thresholds_file.empty()) {
        kv.set("thresholds_file", cfg.thresholds_file);
    }
    kv.write(path);
}

Thresholds load_thresholds(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::parse_file(path);
    Thresholds t;
    t.chi2_tau_df12 = kv.get_double("chi2.tau_df12", 0.0);
    t.vision_tau = kv.get_double("vision.tau", 0.0);
    t.cusum_threshold = kv.get_double("cusum.threshold", 0.0);
    t.cusum_drift = kv.get_double("cusum.drift", 2.0);
    t.recurrent_threshold = kv.get_double("recurrent.threshold", 0.0);
    t.recurrent_weights = kv.get_string("recurrent.weights", "");
    t.recurrent_window = static_cast<int>(kv.get_long("recurrent.window", 20));
    return t;
}

void write_thresholds(const Thresholds& t, const std::string& path) {
    KeyValueFile kv;
    kv.set("chi2.tau_df12", format_double(t.chi2_tau_df12));
    kv.set("vision.tau", format_double(t.vision_tau));
    kv.set("cusum.threshold", format_double(t.cusum_threshold));
    kv.set("cusum.drift", format_double(t.cusum_drift));
    kv.set("recurrent.threshold", format_double(t.recurrent_threshold));
    if (!t.recurrent_weights.empty()) {
        kv.set("recurrent.weights", t.recurrent_weights);
    }
    kv.set("recurrent.window", std::to_string(t.recurrent_window));
    kv.write(path);
}

Thresholds default_thresholds(const DetectorSettings& det) {
    Thresholds t;
    t.chi2_tau_df12 = chi2_quantile(12, 1.0 - det.p_fa);
    // Vision-consistency channel threshold on its 3-dimensional quadratic
    // form; the conservative gamma(Z) noise model keeps it quiet nominally.
    t.vision_tau = chi2_quantile(3, 1.0 - det.p_fa);
    t.cusum_drift = det.cusum_drift;
    // Without calibration the CUSUM threshold falls back to a broad default.
    t.cusum_threshold = 50.0;
    return t;
}

}  // namespace mirage
