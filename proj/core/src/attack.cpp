#include "mirage/attack.hpp"

#include "mirage/frames.hpp"

#include <cmath>

namespace mirage {

VecX falsify_sensors(const VecX& y, const Vec12& xhat_a, const Vec12& s,
                     const MeasurementModel& h) {
    const State12 believed = State12::from_vector(xhat_a);
    const State12 phantom = State12::from_vector(Vec12(xhat_a - s));
    return y + h(phantom) - h(believed);
}

Vec3 marker_earth_from_observation(const MarkerObservation& obs,
                                   const Vec12& xhat, const CameraModel& cam,
                                   double marker_side_m) {
    const State12 x = State12::from_vector(xhat);
    const Vec3 rel = estimate_relative_position(obs, cam, marker_side_m);
    const Mat3 r_ec = earth_to_camera(x, cam.mount);
    const Vec3 camera_center =
        x.position + euler_to_rotation(x.attitude) * cam.mount.offset;
    return camera_center + r_ec.transpose() * rel;
}

FalsifiedMarker falsify_marker(const Vec12& xhat_a, const Vec12& s,
                               const Vec3& marker_earth_est,
                               const CameraModel& cam, double marker_side_m) {
    const Vec12 fake_vec = xhat_a - s;
    const State12 fake = State12::from_vector(fake_vec);

    FalsifiedMarker out;
    // Fake relative position: rotation from the fake Euler angles, drone
    // position shifted by the position part of s.
    const Vec3 camera_center =
        fake.position + euler_to_rotation(fake.attitude) * cam.mount.offset;
    out.p_cam_f =
        earth_to_camera(fake, cam.mount) * (marker_earth_est - camera_center);
    out.in_front = out.p_cam_f.z() > 0.0;
    if (!out.in_front) return out;

    out.center_px = Vec2{cam.focal_px * out.p_cam_f.x() / out.p_cam_f.z(),
                         cam.focal_px * out.p_cam_f.y() / out.p_cam_f.z()};
    out.side_px = cam.focal_px * marker_side_m / out.p_cam_f.z();

    MarkerObservation obs;
    obs.center = out.center_px;
    obs.side_px = out.side_px;
    obs.visible = true;
    out.in_view = observation_in_view(obs, cam);
    return out;
}

AttackEngine::AttackEngine(Deps deps, AttackConfig config)
    : deps_(deps), config_(config),
      filter_(deps.vehicle, MeasurementModel::identity(), deps.ekf, deps.dt),
      tracker_(deps.tracker, deps.dt) {
    state_.s = config_.s0;
}

std::optional<Vec3> AttackEngine::marker_estimate() const {
    if (!tracker_.initialized()) return std::nullopt;
    return tracker_.position();
}

void AttackEngine::stop() {
    state_.stopped = true;
}

void AttackEngine::check_activation(std::uint64_t step,
                                    const MarkerObservation& obs) {
    if (!obs.visible || !filter_.initialized()) {
        trigger_streak_ = 0;
        return;
    }
    const double alt = filter_.belief().mean[kIdxPos + 2];
    // Start once tracking has stabilized so the fake marker begins near the
    // optical axis. GVT additionally waits for cruise altitude; VTOL is
    // already descending when tracking settles, so only centering counts.
    const Vec3 rel =
        estimate_relative_position(obs, deps_.camera, deps_.marker_side_m);
    bool instant = rel.head<2>().norm() < config_.trigger_radius;
    int hold = config_.trigger_hold;
    if (std::abs(alt - deps_.cruise_alt) < deps_.cruise_band) {
        reached_cruise_ = true;
    }
    if (deps_.mission == Mission::kGvt) {
        instant = instant && std::abs(alt - deps_.cruise_alt) < deps_.cruise_band;
    } else {
        // Centered while descending out of the cruise band: the approach
        // has settled.
        instant = instant && reached_cruise_ &&
                  alt < deps_.cruise_alt - deps_.cruise_band;
        hold = config_.trigger_hold / 2;
    }
    trigger_streak_ = instant ? trigger_streak_ + 1 : 0;
    const bool condition = trigger_streak_ >= hold;
    if (condition && !trigger_step_) trigger_step_ = step;
    if (!config_.enabled || state_.active || state_.stopped) return;
    if (condition) {
        state_.active = true;
        state_.start_step = step;
        state_.steps_since_start = 0;
        state_.s = config_.s0;
    }
}

AttackEngine::SensingResult AttackEngine::process_sensing(
    std::uint64_t step, const Measurement& y, const MarkerObservation& true_obs) {
    // Attacker sensor fusion on the true data.
    if (!filter_.initialized()) {
        filter_.initialize(Vec12(y.values), step);
    } else {
        filter_.predict(have_command_ ? last_command_
                                      : hover_command(deps_.vehicle));
        filter_.update(y);
    }

    // Marker earth-position estimate, smoothed by the constant-velocity
    // tracker so invisible frames coast instead of dropping out.
    tracker_.predict();
    if (true_obs.visible) {
        const Vec3 apparent = marker_earth_from_observation(
            true_obs, filter_.belief().mean, deps_.camera, deps_.marker_side_m);
        tracker_.update(apparent);
        marker_lost_count_ = 0;
    } else {
        ++marker_lost_count_;
    }

    check_activation(step, true_obs);

    SensingResult result;
    result.y_f = y.values;
    result.obs_f = true_obs;
    result.falsified = false;

    if (!active()) return result;

    // Stop rules.
    if (config_.stop_rule == StopRule::kMarkerExit &&
        marker_lost_count_ > config_.marker_lost_patience) {
        stop();
        return result;
    }
    if (config_.stop_rule == StopRule::kStepLimit &&
        state_.steps_since_start >= config_.max_attack_steps) {
        stop();
        return result;
    }

    const Vec12& xhat_a = filter_.belief().mean;

    if (config_.mode == AttackMode::kConsistent) {
        result.y_f = falsify_sensors(y.values, xhat_a, state_.s,
                                     filter_.model());
    }

    // Fake marker channel.
    if (!tracker_.initialized()) return result;
    const Vec3 marker_est = tracker_.position();

    Vec3 p_cam_f;
    if (config_.mode == AttackMode::kConsistent) {
        const FalsifiedMarker fake = falsify_marker(
            xhat_a, state_.s, marker_est, deps_.camera, deps_.marker_side_m);
        if (!fake.in_front || !fake.in_view) {
            stop();
            result.y_f = y.values;
            return result;
        }
        p_cam_f = fake.p_cam_f;
    } else {
        // Image-only: the marker rendered a fixed offset away from the
        // attacker's tracked marker position (anchoring to the smoothed
        // track keeps the fake stable against the drone's own motion).
        const State12 xa = State12::from_vector(xhat_a);
        const Vec3 camera_center =
            xa.position + euler_to_rotation(xa.attitude) * deps_.camera.mount.offset;
        const Vec3 base = earth_to_camera(xa, deps_.camera.mount) *
                          (marker_est - camera_center);
        const double dir_norm = config_.image_offset_dir.norm();
        const Vec3 dir = dir_norm > 0.0
                             ? Vec3(config_.image_offset_dir / dir_norm)
                             : Vec3{0.0, 1.0, 0.0};
        p_cam_f = base + config_.alpha * dir;
        if (p_cam_f.z() <= 0.0) {
            stop();
            return result;
        }
    }

    MarkerObservation target;
    target.center = Vec2{deps_.camera.focal_px * p_cam_f.x() / p_cam_f.z(),
                         deps_.camera.focal_px * p_cam_f.y() / p_cam_f.z()};
    target.side_px = deps_.camera.focal_px * deps_.marker_side_m / p_cam_f.z();
    target.visible = true;
    if (!observation_in_view(target, deps_.camera)) {
        stop();
        result.y_f = y.values;
        return result;
    }

    result.frame_f = render_marker(target, deps_.camera, step);
    result.obs_f = detect_marker(result.frame_f);
    if (!result.obs_f.visible) {
        stop();
        result.y_f = y.values;
        result.obs_f = true_obs;
        return result;
    }
    result.falsified = true;
    return result;
}

void AttackEngine::process_command(const RotorCommand& u) {
    last_command_ = u;
    have_command_ = true;
    if (!active()) return;

    if (config_.mode == AttackMode::kConsistent) {
        const auto f = [&](const Vec12& x, const RotorCommand& cmd) -> Vec12 {
            return step(State12::from_vector(x), cmd, deps_.dt, deps_.vehicle)
                .to_vector();
        };
        state_.s = propagate_deviation(state_.s, filter_.belief().mean, u, f);
    }
    ++state_.steps_since_start;
}

AttackEngine::SensingResult AttackEngine::attack_step(
    std::uint64_t step, const Measurement& y, const MarkerObservation& true_obs,
    const RotorCommand& u) {
    SensingResult result = process_sensing(step, y, true_obs);
    process_command(u);
    return result;
}

}  // namespace mirage
