// Scenario configuration: a flat dotted-key text format plus the calibrated
// thresholds sidecar consumed by run/montecarlo.
#pragma once

#include "mirage/attack.hpp"
#include "mirage/control.hpp"
#include "mirage/dynamics.hpp"
#include "mirage/estimation.hpp"
#include "mirage/perception.hpp"
#include "mirage/sensing.hpp"
#include "mirage/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mirage {

/// Parsed key-value file: `key = value`, `#` comments, blank lines ignored.
class KeyValueFile {
  public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text,
                                   const std::string& origin = "<text>");

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value);
    const std::map<std::string, std::string>& entries() const {
        return entries_;
    }
    void write(const std::string& path) const;

  private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

struct DetectorSettings {
    double p_fa{0.01};
    double epsilon{0.05};  // stealthiness margin for the eps-stealthy flag
    bool chi2{true};
    bool cusum{true};
    double cusum_drift{2.0};
    bool recurrent{false};
};

/// Camera-channel imperfections applied when the simulation renders the
/// true marker (vibration, blur, detector jitter).
struct CameraNoiseParams {
    double center_jitter_px{2.0};
    double side_jitter_px{0.5};
};

/// Vision residual channel: range-dependent noise model (derived from the
/// camera jitter parameters plus a floor) and the gating quantile applied to
/// the state-filter vision update and the marker tracker.
struct VisionFusionParams {
    double noise_floor{0.01};   // m per axis
    double gate_quantile{0.999};
    MarkerTracker::Params tracker;
};

struct ScenarioConfig {
    Mission mission{Mission::kGvt};
    double dt{0.02};
    double duration{40.0};
    std::uint64_t seed{1};

    VehicleParams vehicle;
    SensorNoiseParams sensor_noise;
    Vec12 process_noise_std{Vec12::Zero()};

    CameraModel camera;
    CameraNoiseParams camera_noise;
    double marker_side{0.5};

    GroundVehicle ground_vehicle;
    Vec3 drone_start{3.0, 0.0, 0.5};

    MissionParams mission_params;
    PidGains gains;
    VisionFusionParams vision;
    DetectorSettings detectors;
    AttackConfig attack;

    std::string thresholds_file;  // optional sidecar path

    /// Matched-filter EKF tuning derived from the configured noises.
    EkfParams ekf_params() const;
    static ScenarioConfig defaults(Mission mission);
};

ScenarioConfig load_scenario_config(const std::string& path);
ScenarioConfig scenario_from_kv(const KeyValueFile& kv);
void write_scenario_config(const ScenarioConfig& cfg, const std::string& path);

/// Calibrated detector thresholds, produced by `calibrate` and consumed by
/// `run`/`montecarlo`. The physical chi-square threshold is the analytic
/// quantile; the vision-consistency threshold is an empirical quantile
/// because that channel's nominal distribution follows the target's
/// maneuvering, not a chi-square law.
struct Thresholds {
    double chi2_tau_df12{0.0};
    double vision_tau{0.0};
    double cusum_threshold{0.0};
    double cusum_drift{2.0};
    double recurrent_threshold{0.0};
    std::string recurrent_weights;  // path, empty when not calibrated
    int recurrent_window{20};

    bool has_recurrent() const { return !recurrent_weights.empty(); }
};

Thresholds load_thresholds(const std::string& path);
void write_thresholds(const Thresholds& t, const std::string& path);

/// Analytic chi-square thresholds for the configured false-alarm rate; used
/// when no sidecar file is given.
Thresholds default_thresholds(const DetectorSettings& det);

}  // namespace mirage
