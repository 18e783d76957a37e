// Cascade PID controller, mission state machines for ground-vehicle tracking
// and vertical take-off/landing, and the ground-vehicle motion model.
#pragma once

#include "mirage/dynamics.hpp"
#include "mirage/perception.hpp"
#include "mirage/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mirage {

enum class Mission { kGvt, kVtol };

/// GVT: Ascend -> Track. VTOL: Ascend -> Approach -> Land (terminal).
enum class MissionPhase { kAscend, kTrack, kApproach, kLand };

std::string to_string(MissionPhase phase);

struct PidGains {
    double pos_kp{1.7};        // position error -> velocity setpoint, 1/s
    double vel_kp{3.0};        // velocity error -> acceleration, 1/s
    double vel_ki{0.4};
    double vel_integral_max{2.0};
    double att_kp{8.0};        // attitude error -> body-rate setpoint, 1/s
    double rate_kp{25.0};      // rate error -> angular acceleration, 1/s
    double vel_max{4.0};       // m/s
    double accel_max{4.5};     // m/s^2, horizontal
    double tilt_max{0.45};     // rad
};

struct MissionParams {
    double cruise_alt{5.0};        // m
    double ascent_rate{1.25};      // m/s
    double descent_rate{0.5};      // m/s, Approach
    double land_rate{0.75};        // m/s, Land
    double land_threshold{0.5};    // m, ||P_c|| to switch Approach -> Land
    double cruise_band{0.25};      // m, altitude window for Ascend exit
    double touchdown_alt{0.03};    // m
};

/// Constant-speed clockwise traversal of a square at z = 0; corners are
/// turned instantaneously.
struct GroundVehicle {
    double side{20.0};        // m
    double speed{1.0};        // m/s
    Vec2 origin{0.0, 0.0};    // first corner
    double arc{0.0};          // distance traveled along the perimeter

    Vec3 position() const;
    Vec3 velocity() const;
};

/// Advances the vehicle by dt and returns its new earth position.
Vec3 ground_vehicle_step(GroundVehicle& gv, double dt);

/// Phase transition rules. `alt_ok` is the cruise-altitude condition used to
/// leave Ascend; Land requires the relative distance below the threshold.
MissionPhase fsm_step(MissionPhase phase, Mission mission, bool marker_visible,
                      bool alt_ok, const std::optional<Vec3>& p_cam,
                      const MissionParams& mp);

/// Cascade position/velocity/attitude/rate controller. Inputs are the fused
/// state estimate, the marker target in the earth frame (absent before first
/// sighting; the last value is held by the caller), and the mission phase.
class CascadeController {
  public:
    CascadeController(PidGains gains, MissionParams mission_params,
                      VehicleParams vehicle, double dt);

    struct Output {
        RotorCommand command;
        WrenchBody wrench;
        bool saturated{false};
    };

    Output control(const State12& estimate, MissionPhase phase,
                   const std::optional<Vec3>& target_earth,
                   const Vec3& target_velocity);

    void reset();
    /// Clears the velocity integral (used at phase transitions).
    void reset_integral() { vel_integral_.setZero(); }
    /// Altitude setpoint follows ramps in Ascend/Approach/Land; exposed for
    /// logging.
    double altitude_setpoint() const { return alt_setpoint_; }

  private:
    PidGains gains_;
    MissionParams mp_;
    VehicleParams vehicle_;
    double dt_;
    Vec3 vel_integral_{Vec3::Zero()};
    double alt_setpoint_{0.0};
    bool alt_initialized_{false};
};

}  // namespace mirage
