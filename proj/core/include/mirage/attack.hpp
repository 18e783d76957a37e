// Consistent false-data-injection engine: propagates the deviation state and
// emits falsified sensor measurements plus matching marker observations and
// frames. Runs in-process between the simulation and controller halves, or
// behind the telemetry proxy.
#pragma once

#include "mirage/control.hpp"
#include "mirage/dynamics.hpp"
#include "mirage/estimation.hpp"
#include "mirage/perception.hpp"
#include "mirage/sensing.hpp"
#include "mirage/types.hpp"

#include <cstdint>
#include <optional>

namespace mirage {

enum class AttackMode {
    kConsistent,  // falsify sensors and images per the deviation recursion
    kImageOnly,   // displace only the marker channel by a fixed offset
};

enum class StopRule {
    kMarkerExit,  // stop when the true marker leaves the camera scope (or the
                  // fake marker falls outside the frame / behind the camera)
    kStepLimit,
};

struct AttackConfig {
    bool enabled{false};
    AttackMode mode{AttackMode::kConsistent};
    Vec12 s0{Vec12::Zero()};
    double alpha{1.0};                     // m, image-only displacement norm
    Vec3 image_offset_dir{1.0, 0.0, 0.0};  // camera frame, normalized on use
    StopRule stop_rule{StopRule::kMarkerExit};
    int max_attack_steps{750};
    int marker_lost_patience{15};  // frames without the true marker before stop
    double trigger_radius{0.7};    // m, marker near center before starting
    int trigger_hold{50};          // consecutive steps the condition must hold
};

/// Deviation vector in state coordinates plus bookkeeping.
struct AttackState {
    Vec12 s{Vec12::Zero()};
    bool active{false};
    bool stopped{false};
    std::uint64_t start_step{0};
    int steps_since_start{0};
};

/// One step of the deviation recursion: f(xhat, u) - f(xhat - s, u).
/// The step function is pluggable so tests can substitute linear dynamics.
template <typename StepFn>
Vec12 propagate_deviation(const Vec12& s, const Vec12& xhat,
                          const RotorCommand& u, StepFn&& f) {
    return f(xhat, u) - f(xhat - s, u);
}

/// Sensor falsification: y + h(xhat_a - s) - h(xhat_a).
VecX falsify_sensors(const VecX& y, const Vec12& xhat_a, const Vec12& s,
                     const MeasurementModel& h);

/// Earth-frame marker position implied by an observation and a state
/// estimate: p + R_ec(x)^T * V(obs).
Vec3 marker_earth_from_observation(const MarkerObservation& obs,
                                   const Vec12& xhat, const CameraModel& cam,
                                   double marker_side_m);

struct FalsifiedMarker {
    Vec3 p_cam_f{Vec3::Zero()};
    Vec2 center_px{Vec2::Zero()};
    double side_px{0.0};
    bool in_front{false};
    bool in_view{false};
};

/// Fake marker geometry: the camera-frame position a drone at xhat_a - s
/// would see, projected to center and scale.
FalsifiedMarker falsify_marker(const Vec12& xhat_a, const Vec12& s,
                               const Vec3& marker_earth_est,
                               const CameraModel& cam, double marker_side_m);

class AttackEngine {
  public:
    struct Deps {
        VehicleParams vehicle;
        CameraModel camera;
        double marker_side_m{0.5};
        double dt{0.02};
        EkfParams ekf;
        MarkerTracker::Params tracker;
        Mission mission{Mission::kGvt};
        double cruise_alt{5.0};   // activation: marker seen near cruise alt
        double cruise_band{0.25};
    };

    AttackEngine(Deps deps, AttackConfig config);

    struct SensingResult {
        VecX y_f;
        MarkerObservation obs_f;
        Frame frame_f;
        bool falsified{false};  // false: originals pass through untouched
    };

    /// Algorithm lines 3-8: update the attacker belief from true data,
    /// estimate the marker, falsify sensors and the marker channel.
    SensingResult process_sensing(std::uint64_t step, const Measurement& y,
                                  const MarkerObservation& true_obs);

    /// Algorithm line 9: records the actual rotor command and propagates the
    /// deviation state with it.
    void process_command(const RotorCommand& u);

    /// Lines 3-9 in order for a known command; the closed-loop harness calls
    /// the two phases at the points where the data actually flows.
    SensingResult attack_step(std::uint64_t step, const Measurement& y,
                              const MarkerObservation& true_obs,
                              const RotorCommand& u);

    const AttackState& state() const { return state_; }
    const Ekf& attacker_filter() const { return filter_; }
    bool active() const { return state_.active && !state_.stopped; }
    bool stopped() const { return state_.stopped; }
    std::optional<Vec3> marker_estimate() const;

    /// First step at which the activation condition held, recorded even when
    /// the attack is disabled (used to align nominal runs for stealthiness
    /// evaluation).
    std::optional<std::uint64_t> trigger_step() const { return trigger_step_; }

  private:
    void check_activation(std::uint64_t step, const MarkerObservation& obs);
    void stop();

    Deps deps_;
    AttackConfig config_;
    AttackState state_;
    Ekf filter_;
    MarkerTracker tracker_;
    RotorCommand last_command_{};
    bool have_command_{false};
    int marker_lost_count_{0};
    int trigger_streak_{0};
    bool reached_cruise_{false};
    std::optional<std::uint64_t> trigger_step_;
};

}  // namespace mirage
