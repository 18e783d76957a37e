#include "mirage/control.hpp"

#include "mirage/frames.hpp"

#include <algorithm>
#include <cmath>

namespace mirage {

std::string to_string(MissionPhase phase) {
    switch (phase) {
        case MissionPhase::kAscend: return "ascend";
        case MissionPhase::kTrack: return "track";
        case MissionPhase::kApproach: return "approach";
        case MissionPhase::kLand: return "land";
    }
    return "?";
}

Vec3 GroundVehicle::position() const {
    const double perimeter = 4.0 * side;
    double a = std::fmod(arc, perimeter);
    if (a < 0.0) a += perimeter;
    const int leg = static_cast<int>(a / side);
    const double f = a - leg * side;
    switch (leg) {
        case 0: return {origin.x() + f, origin.y(), 0.0};
        case 1: return {origin.x() + side, origin.y() - f, 0.0};
        case 2: return {origin.x() + side - f, origin.y() - side, 0.0};
        default: return {origin.x(), origin.y() - side + f, 0.0};
    }
}

Vec3 GroundVehicle::velocity() const {
    const double perimeter = 4.0 * side;
    double a = std::fmod(arc, perimeter);
    if (a < 0.0) a += perimeter;
    const int leg = static_cast<int>(a / side);
    switch (leg) {
        case 0: return {speed, 0.0, 0.0};
        case 1: return {0.0, -speed, 0.0};
        case 2: return {-speed, 0.0, 0.0};
        default: return {0.0, speed, 0.0};
    }
}

Vec3 ground_vehicle_step(GroundVehicle& gv, double dt) {
    if (gv.speed <= 0.0) throw ConfigError("ground vehicle: speed must be > 0");
    if (dt <= 0.0) throw ConfigError("ground vehicle: dt must be > 0");
    gv.arc += gv.speed * dt;
    return gv.position();
}

MissionPhase fsm_step(MissionPhase phase, Mission mission, bool marker_visible,
                      bool alt_ok, const std::optional<Vec3>& p_cam,
                      const MissionParams& mp) {
    switch (phase) {
        case MissionPhase::kAscend:
            if (marker_visible && alt_ok) {
                return mission == Mission::kGvt ? MissionPhase::kTrack
                                                : MissionPhase::kApproach;
            }
            return phase;
        case MissionPhase::kApproach:
            if (p_cam && p_cam->norm() < mp.land_threshold) {
                return MissionPhase::kLand;
            }
            return phase;
        case MissionPhase::kTrack:
        case MissionPhase::kLand:
            return phase;  // Track holds; Land is terminal.
    }
    return phase;
}

CascadeController::CascadeController(PidGains gains,
                                     MissionParams mission_params,
                                     VehicleParams vehicle, double dt)
    : gains_(gains), mp_(mission_params), vehicle_(vehicle), dt_(dt) {}

void CascadeController::reset() {
    vel_integral_.setZero();
    alt_setpoint_ = 0.0;
    alt_initialized_ = false;
}

CascadeController::Output CascadeController::control(
    const State12& est, MissionPhase phase,
    const std::optional<Vec3>& target_earth, const Vec3& target_velocity) {
    if (!alt_initialized_) {
        alt_setpoint_ = est.position.z();
        alt_initialized_ = true;
    }

    // Altitude setpoint ramps per phase.
    switch (phase) {
        case MissionPhase::kAscend:
            alt_setpoint_ = std::min(alt_setpoint_ + mp_.ascent_rate * dt_,
                                     mp_.cruise_alt);
            break;
        case MissionPhase::kTrack:
            alt_setpoint_ = mp_.cruise_alt;
            break;
        case MissionPhase::kApproach: {
            // Descend only when roughly above the target.
            const bool above =
                target_earth &&
                (Vec2{target_earth->x(), target_earth->y()} -
                 Vec2{est.position.x(), est.position.y()})
                        .norm() < 1.5;
            if (above) {
                alt_setpoint_ =
                    std::max(alt_setpoint_ - mp_.descent_rate * dt_, 0.0);
            }
            break;
        }
        case MissionPhase::kLand:
            alt_setpoint_ = std::max(alt_setpoint_ - mp_.land_rate * dt_, 0.0);
            break;
    }

    // Position loop: earth-frame velocity setpoint with target feedforward.
    Vec3 pos_sp = est.position;
    Vec3 vel_ff = Vec3::Zero();
    if (target_earth) {
        pos_sp.x() = target_earth->x();
        pos_sp.y() = target_earth->y();
        vel_ff.x() = std::clamp(target_velocity.x(), -gains_.vel_max,
                                gains_.vel_max);
        vel_ff.y() = std::clamp(target_velocity.y(), -gains_.vel_max,
                                gains_.vel_max);
    }
    pos_sp.z() = alt_setpoint_;

    Vec3 vel_sp = gains_.pos_kp * (pos_sp - est.position) + vel_ff;
    const double vxy = vel_sp.head<2>().norm();
    if (vxy > gains_.vel_max) vel_sp.head<2>() *= gains_.vel_max / vxy;
    vel_sp.z() = std::clamp(vel_sp.z(), -gains_.vel_max, gains_.vel_max);

    // Velocity loop; the integral only accumulates while unsaturated.
    const Vec3 vel_err = vel_sp - est.velocity;
    Vec3 accel_sp = gains_.vel_kp * vel_err + vel_integral_;
    const double axy = accel_sp.head<2>().norm();
    const bool accel_saturated = axy > gains_.accel_max;
    if (accel_saturated) accel_sp.head<2>() *= gains_.accel_max / axy;
    accel_sp.z() = std::clamp(accel_sp.z(), -0.8 * vehicle_.gravity,
                              gains_.accel_max);
    if (!accel_saturated) {
        vel_integral_ += gains_.vel_ki * vel_err * dt_;
        for (int i = 0; i < 3; ++i) {
            vel_integral_[i] = std::clamp(vel_integral_[i],
                                          -gains_.vel_integral_max,
                                          gains_.vel_integral_max);
        }
    }

    // Acceleration to thrust vector and tilt setpoints (yaw held at zero).
    const Vec3 force =
        vehicle_.mass * (accel_sp + Vec3{0.0, 0.0, vehicle_.gravity});
    const double cy = std::cos(est.attitude.yaw);
    const double sy = std::sin(est.attitude.yaw);
    const Vec3 force_yaw{cy * force.x() + sy * force.y(),
                         -sy * force.x() + cy * force.y(), force.z()};
    const double fnorm = std::max(force_yaw.norm(), 1e-9);
    double roll_sp = -std::asin(std::clamp(force_yaw.y() / fnorm, -1.0, 1.0));
    double pitch_sp = std::atan2(force_yaw.x(), force_yaw.z());
    roll_sp = std::clamp(roll_sp, -gains_.tilt_max, gains_.tilt_max);
    pitch_sp = std::clamp(pitch_sp, -gains_.tilt_max, gains_.tilt_max);
    const double yaw_sp = 0.0;

    // Attitude loop (per-axis, small-angle body-rate setpoints).
    Vec3 rate_sp;
    rate_sp.x() = gains_.att_kp * wrap_angle(roll_sp - est.attitude.roll);
    rate_sp.y() = gains_.att_kp * wrap_angle(pitch_sp - est.attitude.pitch);
    rate_sp.z() = gains_.att_kp * wrap_angle(yaw_sp - est.attitude.yaw);

    // Rate loop with gyroscopic feedforward.
    const Vec3 inertia = vehicle_.inertia_diag();
    const Vec3 torque =
        inertia.cwiseProduct(gains_.rate_kp * (rate_sp - est.body_rates)) +
        est.body_rates.cross(inertia.cwiseProduct(est.body_rates));

    WrenchBody wrench;
    wrench.thrust = std::max(fnorm, 0.0);
    wrench.torque = torque;

    const MixResult mix = inverse_mixer(wrench, vehicle_);
    Output out;
    out.command = mix.command;
    out.wrench = wrench;
    out.saturated = mix.saturated;
    return out;
}

}  // namespace mirage
