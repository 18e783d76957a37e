#include "mirage/scenario.hpp"

#include "mirage/frames.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace mirage {

namespace {

constexpr std::uint64_t kProcessStream = 0x70726f63ULL;  // rng stream salts
constexpr std::uint64_t kSensorStream = 0x73656e73ULL;
constexpr std::uint64_t kCameraStream = 0x63616d72ULL;

}  // namespace

SimHalf::SimHalf(const ScenarioConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), gv_(cfg.ground_vehicle),
      process_rng_(seed ^ kProcessStream),
      sensor_rng_(seed ^ kSensorStream),
      camera_rng_(seed ^ kCameraStream),
      model_(MeasurementModel::identity()) {
    truth_.position = cfg.drone_start;
}

SimHalf::Output SimHalf::emit(std::uint64_t step) {
    Output out;
    out.truth = truth_;
    out.marker_earth = gv_.position();
    out.y = measure(truth_, model_, cfg_.sensor_noise, sensor_rng_, step);
    out.p_cam_true = marker_in_camera(truth_, out.marker_earth, cfg_.camera);

    out.frame = Frame::blank(cfg_.camera, step);
    out.obs = MarkerObservation{};
    // Camera imperfections (vibration, blur, detector jitter) perturb the
    // rendered marker itself, so the frame and its detection stay consistent.
    const double jx = camera_rng_.sample(cfg_.camera_noise.center_jitter_px);
    const double jy = camera_rng_.sample(cfg_.camera_noise.center_jitter_px);
    const double js = camera_rng_.sample(cfg_.camera_noise.side_jitter_px);
    if (out.p_cam_true.z() > 0.0) {
        MarkerObservation target;
        target.center =
            Vec2{cfg_.camera.focal_px * out.p_cam_true.x() / out.p_cam_true.z() + jx,
                 cfg_.camera.focal_px * out.p_cam_true.y() / out.p_cam_true.z() + jy};
        target.side_px = std::max(
            1.0,
            cfg_.camera.focal_px * cfg_.marker_side / out.p_cam_true.z() + js);
        target.visible = true;
        out.frame = render_marker(target, cfg_.camera, step);
        out.obs = detect_marker(out.frame);
    }
    out.true_visible = out.obs.visible;
    return out;
}

void SimHalf::advance(const RotorCommand& u) {
    ground_vehicle_step(gv_, cfg_.dt);
    const Vec12 w = process_rng_.sample_vec(cfg_.process_noise_std);
    truth_ = step(truth_, u, cfg_.dt, w, cfg_.vehicle);
    if (truth_.position.z() < 0.0) {  // ground plane
        truth_.position.z() = 0.0;
        truth_.velocity.z() = std::max(0.0, truth_.velocity.z());
    }
    ++steps_advanced_;
    const Vec12 v = truth_.to_vector();
    if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 1e9) {
        throw SimulationError("simulation diverged",
                              static_cast<std::int64_t>(steps_advanced_));
    }
}

VecX build_recurrent_input(const ResidualRecord& physical,
                           const Vec3& vision_whitened, bool vision_used) {
    VecX input = VecX::Zero(kRecurrentInputDim);
    for (int i = 0; i < kStateDim; ++i) {
        input[i] = physical.residual[i] /
                   std::sqrt(physical.innovation_cov(i, i));
    }
    if (vision_used) input.segment<3>(kStateDim) = vision_whitened;
    input[kRecurrentInputDim - 1] = vision_used ? 1.0 : 0.0;
    return input;
}

namespace {

MarkerTracker::Params uncapped(MarkerTracker::Params p) {
    p.cap_pos_std = 0.0;
    p.cap_vel_std = 0.0;
    return p;
}

}  // namespace

CtlHalf::CtlHalf(const ScenarioConfig& cfg, const Thresholds& thresholds,
                 std::shared_ptr<const GruModel> recurrent_model)
    : cfg_(cfg), thresholds_(thresholds),
      filter_(cfg.vehicle, MeasurementModel::identity(), cfg.ekf_params(),
              cfg.dt),
      control_tracker_(uncapped(cfg.vision.tracker), cfg.dt),
      detect_tracker_(cfg.vision.tracker, cfg.dt),
      controller_(cfg.gains, cfg.mission_params, cfg.vehicle, cfg.dt),
      cusum_(thresholds.cusum_drift, thresholds.cusum_threshold),
      recurrent_model_(std::move(recurrent_model)),
      vision_gate_(chi2_quantile(3, cfg.vision.gate_quantile)) {
    if (recurrent_model_ && cfg_.detectors.recurrent) {
        recurrent_.emplace(*recurrent_model_, thresholds_.recurrent_threshold,
                           thresholds_.recurrent_window);
    }
}

CtlHalf::Output CtlHalf::step(std::uint64_t step, const Measurement& y,
                              const MarkerObservation& obs) {
    Output out;

    ResidualRecord rec_phys;
    if (!filter_.initialized()) {
        filter_.initialize(Vec12(y.values), step);
        hold_xy_ = Vec2{y.values[0], y.values[1]};
        rec_phys.residual = VecX::Zero(kStateDim);
        rec_phys.innovation_cov =
            cfg_.ekf_params()
                .measurement_noise_std.array()
                .square()
                .matrix()
                .asDiagonal();
        rec_phys.step = step;
    } else {
        filter_.predict(prev_command_);
        rec_phys = filter_.update(y);
    }

    // Vision channels. The control tracker follows the observations
    // unconditionally; the detection tracker is gated and its coast
    // covariance capped, so data inconsistent with plausible marker motion
    // keeps scoring high instead of dragging the reference along.
    control_tracker_.predict();
    detect_tracker_.predict();
    double vision_score = 0.0;
    bool vision_used = false;
    bool vision_gated = false;
    Vec3 p_cam_obs = Vec3::Zero();
    Vec3 vision_resid_whitened = Vec3::Zero();
    if (obs.visible) {
        p_cam_obs =
            estimate_relative_position(obs, cfg_.camera, cfg_.marker_side);
        out.p_cam_seen = p_cam_obs;
        out.seen_visible = true;

        const auto apparent_from_belief = [&]() -> Vec3 {
            const State12 xs = filter_.belief().state();
            const Vec3 cam_center =
                xs.position +
                euler_to_rotation(xs.attitude) * cfg_.camera.mount.offset;
            return cam_center +
                   earth_to_camera(xs, cfg_.camera.mount).transpose() * p_cam_obs;
        };

        if (tracker_updates_ >= kTrackerWarmup) {
            const Vec3 marker_pred = detect_tracker_.position();
            const CameraModel cam = cfg_.camera;
            const auto h_vis = [&cam, &marker_pred](const Vec12& xv) -> VecX {
                const State12 xs = State12::from_vector(xv);
                const Vec3 cam_center =
                    xs.position + euler_to_rotation(xs.attitude) * cam.mount.offset;
                return VecX(earth_to_camera(xs, cam.mount) *
                            (marker_pred - cam_center));
            };
            // The detector trusts vision only to the range-dependent
            // localization error bound gamma(Z) = 2 Z^2 (1 px) / (f l) +
            // floor, applied per axis as a conservative noise model.
            const double z_pred =
                std::max(0.2, h_vis(filter_.belief().mean)[2]);
            const double gamma =
                2.0 * z_pred * z_pred /
                    (cfg_.camera.focal_px * cfg_.marker_side) +
                cfg_.vision.noise_floor;
            const Mat3 r_ec = earth_to_camera(filter_.belief().state(),
                                              cfg_.camera.mount);
            const Mat3 noise =
                gamma * gamma * Mat3::Identity() +
                r_ec * detect_tracker_.position_cov() * r_ec.transpose();
            bool accepted = false;
            const ResidualRecord rec_vis = filter_.update_custom(
                VecX(p_cam_obs), h_vis, MatX(noise), vision_gate_, &accepted);
            vision_score = chi2_score(rec_vis.residual, rec_vis.innovation_cov);
            vision_used = true;
            vision_gated = !accepted;
            for (int i = 0; i < 3; ++i) {
                vision_resid_whitened[i] =
                    rec_vis.residual[i] /
                    std::sqrt(rec_vis.innovation_cov(i, i));
            }
            const Vec3 apparent = apparent_from_belief();
            control_tracker_.update(apparent);
            if (accepted) {
                detect_tracker_.update(apparent);
                ++tracker_updates_;
            }
        } else {
            const Vec3 apparent = apparent_from_belief();
            control_tracker_.update(apparent);
            detect_tracker_.update(apparent);
            ++tracker_updates_;
        }
    }

    // Detector scores. The chi-square detector alarms when either stream
    // exceeds its threshold: the physical quadratic form against the
    // analytic quantile, the vision consistency term against its calibrated
    // quantile.
    const double phys_score =
        chi2_score(rec_phys.residual, rec_phys.innovation_cov);
    out.chi2_score = phys_score + vision_score;
    out.phys_residual = rec_phys.residual;
    out.chi2_df = kStateDim + (vision_used ? 3 : 0);
    out.chi2_alarm =
        cfg_.detectors.chi2 &&
        (phys_score > thresholds_.chi2_tau_df12 ||
         (vision_used && vision_score > thresholds_.vision_tau));
    out.vision_score = vision_score;
    out.vision_gated = vision_gated;

    if (cfg_.detectors.cusum) {
        const DetectorVerdict v =
            cusum_.step(out.chi2_score, static_cast<double>(out.chi2_df), step);
        out.cusum_stat = v.score;
        out.cusum_alarm = v.alarm;
    }

    out.recurrent_input =
        build_recurrent_input(rec_phys, vision_resid_whitened, vision_used);
    if (recurrent_) {
        const auto [score, alarm] = recurrent_->push(out.recurrent_input);
        out.recurrent_score = score;
        out.recurrent_alarm = alarm;
        out.recurrent_armed = true;
    }

    // Mission state machine. When the marker fills or leaves the frame on
    // final approach, the relative position is dead-reckoned from the
    // tracker so the landing threshold stays reachable.
    const bool alt_ok =
        std::abs(filter_.belief().mean[kIdxPos + 2] -
                 cfg_.mission_params.cruise_alt) < cfg_.mission_params.cruise_band;
    std::optional<Vec3> p_cam_opt;
    if (out.seen_visible) {
        p_cam_opt = p_cam_obs;
    } else if (control_tracker_.initialized() &&
               tracker_updates_ >= kTrackerWarmup) {
        const State12 xs = filter_.belief().state();
        const Vec3 cam_center =
            xs.position + euler_to_rotation(xs.attitude) * cfg_.camera.mount.offset;
        p_cam_opt = earth_to_camera(xs, cfg_.camera.mount) *
                    (control_tracker_.position() - cam_center);
    }
    const MissionPhase prev_phase = phase_;
    phase_ = fsm_step(phase_, cfg_.mission, obs.visible, alt_ok, p_cam_opt,
                      cfg_.mission_params);
    if (phase_ != prev_phase) controller_.reset_integral();

    // Target: the hold position while ascending, the tracked marker after.
    std::optional<Vec3> target;
    Vec3 target_vel = Vec3::Zero();
    if (phase_ != MissionPhase::kAscend && control_tracker_.initialized()) {
        target = control_tracker_.position();
        target_vel = control_tracker_.velocity();
    } else {
        target = Vec3{hold_xy_.x(), hold_xy_.y(), 0.0};
    }

    const CascadeController::Output ctl = controller_.control(
        filter_.belief().state(), phase_, target, target_vel);
    out.command = ctl.command;
    out.saturated = ctl.saturated;
    out.phase = phase_;
    out.estimate = filter_.belief().mean;
    prev_command_ = ctl.command;

    out.mission_complete =
        phase_ == MissionPhase::kLand &&
        filter_.belief().mean[kIdxPos + 2] <= cfg_.mission_params.touchdown_alt;
    return out;
}

RunRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                       const Thresholds& thresholds,
                       std::shared_ptr<const GruModel> recurrent_model) {
    SimHalf sim(cfg, seed);
    CtlHalf ctl(cfg, thresholds, recurrent_model);

    AttackEngine::Deps deps;
    deps.vehicle = cfg.vehicle;
    deps.camera = cfg.camera;
    deps.marker_side_m = cfg.marker_side;
    deps.dt = cfg.dt;
    deps.ekf = cfg.ekf_params();
    deps.tracker = cfg.vision.tracker;
    deps.mission = cfg.mission;
    deps.cruise_alt = cfg.mission_params.cruise_alt;
    deps.cruise_band = cfg.mission_params.cruise_band;
    AttackEngine engine(deps, cfg.attack);

    const auto n_steps =
        static_cast<std::uint64_t>(std::llround(cfg.duration / cfg.dt));
    RunRecord record;
    record.seed = seed;
    record.steps.reserve(n_steps);

    for (std::uint64_t t = 0; t < n_steps; ++t) {
        const SimHalf::Output so = sim.emit(t);
        const AttackEngine::SensingResult ar =
            engine.process_sensing(t, so.y, so.obs);
        // Deviation as used for this step's falsification, before the
        // end-of-step propagation with u_t.
        const Vec12 deviation_used =
            engine.state().active ? engine.state().s : Vec12(Vec12::Zero());
        const Vec12 attacker_mean = engine.attacker_filter().initialized()
                                        ? engine.attacker_filter().belief().mean
                                        : Vec12(Vec12::Zero());

        Measurement y_ctl;
        y_ctl.values = ar.y_f;
        y_ctl.step = t;
        const MarkerObservation& obs_ctl = ar.falsified ? ar.obs_f : so.obs;

        const CtlHalf::Output co = ctl.step(t, y_ctl, obs_ctl);
        engine.process_command(co.command);

        StepLog log;
        log.step = t;
        log.phase = static_cast<int>(co.phase);
        log.attack_active = engine.active();
        log.attack_falsified = ar.falsified;
        log.truth = so.truth.to_vector();
        log.sys_estimate = co.estimate;
        log.attacker_estimate = attacker_mean;
        log.deviation = deviation_used;
        log.y = so.y.values;
        log.y_f = ar.y_f;
        log.p_cam_true = so.p_cam_true;
        log.marker_earth = so.marker_earth;
        log.true_visible = so.true_visible;
        log.p_cam_seen = co.p_cam_seen;
        log.seen_visible = co.seen_visible;
        log.obs_center_px = obs_ctl.center;
        log.obs_side_px = obs_ctl.side_px;
        log.phys_residual = co.phys_residual;
        log.chi2_score = co.chi2_score;
        log.chi2_df = co.chi2_df;
        log.chi2_alarm = co.chi2_alarm;
        log.cusum_stat = co.cusum_stat;
        log.cusum_alarm = co.cusum_alarm;
        log.recurrent_score = co.recurrent_score;
        log.recurrent_alarm = co.recurrent_alarm;
        log.recurrent_armed = co.recurrent_armed;
        log.vision_score = co.vision_score;
        log.vision_gated = co.vision_gated;
        log.recurrent_input = co.recurrent_input;
        log.command = co.command;
        log.saturated = co.saturated;
        record.steps.push_back(std::move(log));

        if (co.mission_complete) {
            record.summary.landed = true;
            record.summary.land_step = static_cast<std::int64_t>(t);
            break;
        }
        if (t + 1 < n_steps) sim.advance(co.command);
    }

    // Summary metrics.
    RunSummary& s = record.summary;
    s.steps = record.steps.size();
    if (engine.trigger_step()) {
        s.trigger_step = static_cast<std::int64_t>(*engine.trigger_step());
    }
    if (engine.state().active || engine.state().stopped) {
        s.attack_start = static_cast<std::int64_t>(engine.state().start_step);
        if (engine.state().stopped) {
            s.attack_stop = s.attack_start + engine.state().steps_since_start;
        }
    }
    const std::int64_t dev_from =
        s.trigger_step >= 0 ? s.trigger_step : static_cast<std::int64_t>(0);
    const std::int64_t dev_until =
        s.attack_stop >= 0 ? s.attack_stop
                           : static_cast<std::int64_t>(record.steps.size());
    for (const StepLog& log : record.steps) {
        const auto t = static_cast<std::int64_t>(log.step);
        if (t < dev_from || t >= dev_until) continue;
        const Vec2 offset = log.marker_earth.head<2>() -
                            log.truth.head<2>();
        s.peak_dev_xy = std::max(s.peak_dev_xy, offset.norm());
    }
    if (!record.steps.empty()) {
        const StepLog& last = record.steps.back();
        s.final_marker_dist_xy =
            (last.marker_earth.head<2>() - last.truth.head<2>()).norm();
        // Offset when the attack ended: at the stop rule or, if the mission
        // finished first, at the final step.
        std::size_t stop_at = record.steps.size() - 1;
        if (s.attack_stop >= 0 &&
            static_cast<std::size_t>(s.attack_stop) < record.steps.size()) {
            stop_at = static_cast<std::size_t>(s.attack_stop);
        }
        const StepLog& at = record.steps[stop_at];
        s.stop_dist_xy =
            (at.marker_earth.head<2>() - at.truth.head<2>()).norm();
    }
    return record;
}

RunRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    return run_scenario(cfg, seed, default_thresholds(cfg.detectors), nullptr);
}

namespace {

struct RunPair {
    RunRecord nominal;
    RunRecord attacked;
};

std::vector<std::vector<bool>> aligned_verdicts(
    const std::vector<RunRecord>& records, std::size_t len,
    bool (*pick)(const StepLog&)) {
    std::vector<std::vector<bool>> out;
    out.reserve(records.size());
    for (const RunRecord& r : records) {
        const auto start = static_cast<std::size_t>(r.summary.trigger_step);
        std::vector<bool> row(len, false);
        for (std::size_t i = 0; i < len; ++i) row[i] = pick(r.steps[start + i]);
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace

MonteCarloReport monte_carlo(const ScenarioConfig& cfg, int n_runs,
                             const Thresholds& thresholds,
                             std::shared_ptr<const GruModel> recurrent_model,
                             int n_threads) {
    if (n_runs < 1) throw ConfigError("monte_carlo: n_runs must be >= 1");
    if (n_threads <= 0) {
        n_threads = static_cast<int>(
            std::max(1u, std::thread::hardware_concurrency()));
    }
    n_threads = std::min(n_threads, n_runs);

    const bool attacked_mode = cfg.attack.enabled;
    std::vector<RunRecord> nominal(static_cast<std::size_t>(n_runs));
    std::vector<RunRecord> attacked;
    if (attacked_mode) attacked.resize(static_cast<std::size_t>(n_runs));

    ScenarioConfig nominal_cfg = cfg;
    nominal_cfg.attack.enabled = false;

    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_runs));
    const auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_runs) return;
            try {
                const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
                nominal[static_cast<std::size_t>(i)] =
                    run_scenario(nominal_cfg, seed, thresholds, recurrent_model);
                if (attacked_mode) {
                    attacked[static_cast<std::size_t>(i)] =
                        run_scenario(cfg, seed, thresholds, recurrent_model);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (int i = 0; i < n_runs; ++i) {
        if (errors[static_cast<std::size_t>(i)]) {
            try {
                std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
            } catch (const std::exception& e) {
                throw SimulationError("run " + std::to_string(i) + ": " +
                                      e.what());
            }
        }
    }

    MonteCarloReport report;
    report.runs = static_cast<std::size_t>(n_runs);
    report.base_seed = cfg.seed;
    report.alpha = cfg.attack.alpha;
    report.epsilon = cfg.detectors.epsilon;

    // Nominal alarm rates over every logged step.
    std::size_t chi2_hits = 0, cusum_hits = 0, rec_hits = 0, rec_steps = 0,
                total = 0;
    for (const RunRecord& r : nominal) {
        for (const StepLog& log : r.steps) {
            ++total;
            chi2_hits += log.chi2_alarm ? 1 : 0;
            cusum_hits += log.cusum_alarm ? 1 : 0;
            if (log.recurrent_armed) {
                ++rec_steps;
                rec_hits += log.recurrent_alarm ? 1 : 0;
            }
        }
    }
    report.nominal_steps = total;
    report.nominal_chi2_rate =
        total ? static_cast<double>(chi2_hits) / total : 0.0;
    report.nominal_cusum_rate =
        total ? static_cast<double>(cusum_hits) / total : 0.0;
    report.nominal_recurrent_rate =
        rec_steps ? static_cast<double>(rec_hits) / rec_steps : 0.0;

    if (!attacked_mode) return report;

    // Alignment at the trigger step; attacked windows end at the stop rule,
    // and every trace truncates to the shortest window.
    std::size_t len = SIZE_MAX;
    for (const RunRecord& r : nominal) {
        if (r.summary.trigger_step < 0) {
            throw SimulationError(
                "monte_carlo: a nominal run never reached the attack trigger");
        }
        len = std::min(len, r.steps.size() -
                                static_cast<std::size_t>(r.summary.trigger_step));
    }
    for (const RunRecord& r : attacked) {
        if (r.summary.trigger_step < 0) {
            throw SimulationError(
                "monte_carlo: an attacked run never reached the trigger");
        }
        const auto window_end =
            r.summary.attack_stop >= 0
                ? static_cast<std::size_t>(r.summary.attack_stop)
                : r.steps.size();
        if (window_end <= static_cast<std::size_t>(r.summary.trigger_step)) {
            throw SimulationError("monte_carlo: empty attack window");
        }
        len = std::min(len, window_end -
                                static_cast<std::size_t>(r.summary.trigger_step));
    }
    report.aligned_len = len;

    const auto chi2_pick = [](const StepLog& l) { return l.chi2_alarm; };
    const auto cusum_pick = [](const StepLog& l) { return l.cusum_alarm; };
    const auto rec_pick = [](const StepLog& l) { return l.recurrent_alarm; };
    if (cfg.detectors.chi2) {
        report.chi2 = evaluate_stealthiness(
            aligned_verdicts(nominal, len, chi2_pick),
            aligned_verdicts(attacked, len, chi2_pick), cfg.detectors.epsilon);
    }
    if (cfg.detectors.cusum) {
        report.cusum = evaluate_stealthiness(
            aligned_verdicts(nominal, len, cusum_pick),
            aligned_verdicts(attacked, len, cusum_pick), cfg.detectors.epsilon);
    }
    if (cfg.detectors.recurrent && recurrent_model) {
        report.recurrent = evaluate_stealthiness(
            aligned_verdicts(nominal, len, rec_pick),
            aligned_verdicts(attacked, len, rec_pick), cfg.detectors.epsilon);
    }

    // Effectiveness over the attacked runs.
    double peak_sum = 0.0, final_sum = 0.0, stop_sum = 0.0;
    std::size_t effective = 0, landed = 0, stop_hits = 0;
    for (const RunRecord& r : attacked) {
        peak_sum += r.summary.peak_dev_xy;
        final_sum += r.summary.final_marker_dist_xy;
        stop_sum += r.summary.stop_dist_xy;
        landed += r.summary.landed ? 1 : 0;
        if (r.summary.stop_dist_xy >= report.stop_dist_threshold) ++stop_hits;
        if (r.summary.peak_dev_xy >= cfg.attack.alpha) ++effective;

        std::vector<Vec3> dev_trace;
        const auto start = static_cast<std::size_t>(r.summary.trigger_step);
        const auto until =
            r.summary.attack_stop >= 0
                ? static_cast<std::size_t>(r.summary.attack_stop)
                : r.steps.size();
        for (std::size_t i = start; i < until && i < r.steps.size(); ++i) {
            const Vec2 off = r.steps[i].marker_earth.head<2>() -
                             r.steps[i].truth.head<2>();
            dev_trace.push_back(Vec3{off.x(), off.y(), 0.0});
        }
        const EffectivenessResult er = effectiveness(dev_trace, cfg.attack.alpha);
        report.first_crossing_steps.push_back(
            er.first_crossing ? static_cast<std::int64_t>(*er.first_crossing)
                              : -1);
    }
    report.effective_fraction =
        static_cast<double>(effective) / static_cast<double>(n_runs);
    report.mean_peak_dev = peak_sum / static_cast<double>(n_runs);
    report.mean_final_dist = final_sum / static_cast<double>(n_runs);
    report.mean_stop_dist = stop_sum / static_cast<double>(n_runs);
    report.stop_dist_hit_fraction =
        static_cast<double>(stop_hits) / static_cast<double>(n_runs);
    report.landed_fraction =
        static_cast<double>(landed) / static_cast<double>(n_runs);
    return report;
}

namespace {

void append_vec(std::vector<std::string>& h, const std::string& prefix, int n) {
    for (int i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::string> run_csv_header() {
    std::vector<std::string> h;
    h.emplace_back("step");
    h.emplace_back("phase");
    h.emplace_back("attack_active");
    h.emplace_back("attack_falsified");
    append_vec(h, "truth", 12);
    append_vec(h, "est", 12);
    append_vec(h, "att_est", 12);
    append_vec(h, "s", 12);
    append_vec(h, "y", 12);
    append_vec(h, "yf", 12);
    append_vec(h, "pcam_true", 3);
    append_vec(h, "marker_e", 3);
    h.emplace_back("true_visible");
    append_vec(h, "pcam_seen", 3);
    h.emplace_back("seen_visible");
    h.emplace_back("obs_cx");
    h.emplace_back("obs_cy");
    h.emplace_back("obs_side");
    append_vec(h, "r", 12);
    h.emplace_back("chi2_score");
    h.emplace_back("chi2_df");
    h.emplace_back("chi2_alarm");
    h.emplace_back("cusum_stat");
    h.emplace_back("cusum_alarm");
    h.emplace_back("recurrent_score");
    h.emplace_back("recurrent_alarm");
    h.emplace_back("recurrent_armed");
    h.emplace_back("vision_score");
    h.emplace_back("vision_gated");
    append_vec(h, "rin", kRecurrentInputDim);
    append_vec(h, "u", 4);
    h.emplace_back("saturated");
    return h;
}

void export_run_csv(const RunRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("export_run_csv: cannot open " + path);
    const std::vector<std::string> header = run_csv_header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << header[i] << (i + 1 == header.size() ? "\n" : ",");
    }
    for (const StepLog& l : record.steps) {
        std::vector<double> row;
        row.reserve(header.size());
        row.push_back(static_cast<double>(l.step));
        row.push_back(static_cast<double>(l.phase));
        row.push_back(l.attack_active ? 1.0 : 0.0);
        row.push_back(l.attack_falsified ? 1.0 : 0.0);
        for (int i = 0; i < 12; ++i) row.push_back(l.truth[i]);
        for (int i = 0; i < 12; ++i) row.push_back(l.sys_estimate[i]);
        for (int i = 0; i < 12; ++i) row.push_back(l.attacker_estimate[i]);
        for (int i = 0; i < 12; ++i) row.push_back(l.deviation[i]);
        for (int i = 0; i < 12; ++i) row.push_back(l.y[i]);
        for (int i = 0; i < 12; ++i) row.push_back(l.y_f[i]);
        for (int i = 0; i < 3; ++i) row.push_back(l.p_cam_true[i]);
        for (int i = 0; i < 3; ++i) row.push_back(l.marker_earth[i]);
        row.push_back(l.true_visible ? 1.0 : 0.0);
        for (int i = 0; i < 3; ++i) row.push_back(l.p_cam_seen[i]);
        row.push_back(l.seen_visible ? 1.0 : 0.0);
        row.push_back(l.obs_center_px.x());
        row.push_back(l.obs_center_px.y());
        row.push_back(l.obs_side_px);
        for (int i = 0; i < 12; ++i) row.push_back(l.phys_residual[i]);
        row.push_back(l.chi2_score);
        row.push_back(static_cast<double>(l.chi2_df));
        row.push_back(l.chi2_alarm ? 1.0 : 0.0);
        row.push_back(l.cusum_stat);
        row.push_back(l.cusum_alarm ? 1.0 : 0.0);
        row.push_back(l.recurrent_score);
        row.push_back(l.recurrent_alarm ? 1.0 : 0.0);
        row.push_back(l.recurrent_armed ? 1.0 : 0.0);
        row.push_back(l.vision_score);
        row.push_back(l.vision_gated ? 1.0 : 0.0);
        for (int i = 0; i < kRecurrentInputDim; ++i) {
            row.push_back(l.recurrent_input[i]);
        }
        for (int i = 0; i < 4; ++i) row.push_back(l.command[i]);
        row.push_back(l.saturated ? 1.0 : 0.0);

        for (std::size_t i = 0; i < row.size(); ++i) {
            out << fmt(row[i]) << (i + 1 == row.size() ? "\n" : ",");
        }
    }
    if (!out) throw IoError("export_run_csv: write failed for " + path);
}

std::vector<std::vector<double>> read_csv_numeric(
    const std::string& path, std::vector<std::string>* header) {
    std::ifstream in(path);
    if (!in) throw IoError("read_csv_numeric: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("read_csv_numeric: empty file " + path);
    }
    if (header) {
        header->clear();
        std::istringstream hs(line);
        std::string tok;
        while (std::getline(hs, tok, ',')) header->push_back(tok);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
        rows.push_back(std::move(row));
    }
    return rows;
}

void export_run_summary(const RunRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("export_run_summary: cannot open " + path);
    out << "seed = " << record.seed << "\n";
    out << "steps = " << record.summary.steps << "\n";
    out << "trigger_step = " << record.summary.trigger_step << "\n";
    out << "attack_start = " << record.summary.attack_start << "\n";
    out << "attack_stop = " << record.summary.attack_stop << "\n";
    out << "peak_dev_xy = " << fmt(record.summary.peak_dev_xy) << "\n";
    out << "final_marker_dist_xy = " << fmt(record.summary.final_marker_dist_xy)
        << "\n";
    out << "stop_dist_xy = " << fmt(record.summary.stop_dist_xy) << "\n";
    out << "landed = " << (record.summary.landed ? 1 : 0) << "\n";
    out << "land_step = " << record.summary.land_step << "\n";
    if (!out) throw IoError("export_run_summary: write failed for " + path);
}

namespace {

void write_stats(std::ofstream& out, const std::string& name,
                 const std::optional<AlarmStats>& stats) {
    if (!stats) return;
    out << name << ".p_fa = " << fmt(stats->p_fa) << "\n";
    out << name << ".p_td = " << fmt(stats->p_td) << "\n";
    out << name << ".eps_stealthy = " << (stats->eps_stealthy ? 1 : 0) << "\n";
}

}  // namespace

void export_report(const MonteCarloReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::string summary_path = dir + "/summary.txt";
    std::ofstream out(summary_path);
    if (!out) throw IoError("export_report: cannot open " + summary_path);
    out << "runs = " << report.runs << "\n";
    out << "base_seed = " << report.base_seed << "\n";
    out << "aligned_len = " << report.aligned_len << "\n";
    out << "alpha = " << fmt(report.alpha) << "\n";
    out << "epsilon = " << fmt(report.epsilon) << "\n";
    out << "nominal_steps = " << report.nominal_steps << "\n";
    out << "chi2.nominal_rate = " << fmt(report.nominal_chi2_rate) << "\n";
    out << "cusum.nominal_rate = " << fmt(report.nominal_cusum_rate) << "\n";
    out << "recurrent.nominal_rate = " << fmt(report.nominal_recurrent_rate)
        << "\n";
    write_stats(out, "chi2", report.chi2);
    write_stats(out, "cusum", report.cusum);
    write_stats(out, "recurrent", report.recurrent);
    out << "effectiveness.fraction = " << fmt(report.effective_fraction) << "\n";
    out << "effectiveness.mean_peak_dev = " << fmt(report.mean_peak_dev) << "\n";
    out << "deviation.final_mean = " << fmt(report.mean_final_dist) << "\n";
    out << "deviation.stop_mean = " << fmt(report.mean_stop_dist) << "\n";
    out << "deviation.stop_hit_fraction = "
        << fmt(report.stop_dist_hit_fraction) << "\n";
    out << "deviation.stop_threshold = " << fmt(report.stop_dist_threshold)
        << "\n";
    out << "landed.fraction = " << fmt(report.landed_fraction) << "\n";
    if (!out) throw IoError("export_report: write failed");

    // Per-step alarm rates.
    if (report.chi2 || report.cusum || report.recurrent) {
        std::ofstream rates(dir + "/rates.csv");
        rates << "t";
        if (report.chi2) rates << ",chi2_fa,chi2_td";
        if (report.cusum) rates << ",cusum_fa,cusum_td";
        if (report.recurrent) rates << ",recurrent_fa,recurrent_td";
        rates << "\n";
        for (std::size_t t = 0; t < report.aligned_len; ++t) {
            rates << t;
            if (report.chi2) {
                rates << "," << fmt(report.chi2->per_step_fa[t]) << ","
                      << fmt(report.chi2->per_step_td[t]);
            }
            if (report.cusum) {
                rates << "," << fmt(report.cusum->per_step_fa[t]) << ","
                      << fmt(report.cusum->per_step_td[t]);
            }
            if (report.recurrent) {
                rates << "," << fmt(report.recurrent->per_step_fa[t]) << ","
                      << fmt(report.recurrent->per_step_td[t]);
            }
            rates << "\n";
        }
    }
}

namespace {

struct SvgMapper {
    double min_x, max_x, min_y, max_y;
    double width, height, margin;

    double sx(double x) const {
        return margin + (x - min_x) / std::max(1e-9, max_x - min_x) *
                            (width - 2 * margin);
    }
    double sy(double y) const {
        return height - margin -
               (y - min_y) / std::max(1e-9, max_y - min_y) *
                   (height - 2 * margin);
    }
};

}  // namespace

void write_trajectory_svg(const RunRecord& record, const ScenarioConfig& cfg,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_trajectory_svg: cannot open " + path);

    GroundVehicle gv = cfg.ground_vehicle;
    std::vector<Vec3> gv_pts, drone_pts;
    gv.arc = 0.0;
    gv_pts.push_back(gv.position());
    for (std::size_t i = 1; i < record.steps.size(); ++i) {
        ground_vehicle_step(gv, cfg.dt);
        gv_pts.push_back(gv.position());
    }
    for (const StepLog& l : record.steps) {
        drone_pts.push_back(State12::from_vector(l.truth).position);
    }

    SvgMapper m{1e30, -1e30, 1e30, -1e30, 640, 640, 40};
    for (const auto* pts : {&gv_pts, &drone_pts}) {
        for (const Vec3& p : *pts) {
            m.min_x = std::min(m.min_x, p.x());
            m.max_x = std::max(m.max_x, p.x());
            m.min_y = std::min(m.min_y, p.y());
            m.max_y = std::max(m.max_y, p.y());
        }
    }

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
           "height=\"640\">\n";
    const auto polyline = [&](const std::vector<Vec3>& pts,
                              const std::string& style) {
        out << "<polyline fill=\"none\" " << style << " points=\"";
        for (const Vec3& p : pts) out << m.sx(p.x()) << "," << m.sy(p.y()) << " ";
        out << "\"/>\n";
    };
    polyline(gv_pts, "stroke=\"red\" stroke-dasharray=\"6,4\"");
    polyline(drone_pts, "stroke=\"blue\"");
    out << "</svg>\n";
}

void write_alarm_svg(const MonteCarloReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_alarm_svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" "
           "height=\"320\">\n";
    if (report.chi2 && report.aligned_len > 0) {
        const auto plot = [&](const std::vector<double>& v,
                              const std::string& color) {
            out << "<polyline fill=\"none\" stroke=\"" << color
                << "\" points=\"";
            for (std::size_t t = 0; t < v.size(); ++t) {
                const double x =
                    40 + 720.0 * static_cast<double>(t) /
                             std::max<std::size_t>(1, v.size() - 1);
                const double y = 280 - 240.0 * std::min(1.0, v[t]);
                out << x << "," << y << " ";
            }
            out << "\"/>\n";
        };
        plot(report.chi2->per_step_fa, "gray");
        plot(report.chi2->per_step_td, "orange");
    }
    out << "</svg>\n";
}

}  // namespace mirage
