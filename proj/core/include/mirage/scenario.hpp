// Closed-loop mission assembly, Monte Carlo experiment runner, metrics and
// CSV/summary output. The simulation and controller halves are separate
// objects so the split-process tools execute exactly the same arithmetic.
#pragma once

#include "mirage/attack.hpp"
#include "mirage/config.hpp"
#include "mirage/control.hpp"
#include "mirage/detectors.hpp"
#include "mirage/estimation.hpp"
#include "mirage/recurrent.hpp"
#include "mirage/sensing.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mirage {

/// Width of the learned detector's input vector: 12 whitened physical
/// residual channels, 3 whitened vision residual channels, visibility flag.
inline constexpr int kRecurrentInputDim = 16;

/// Shared by the runtime scorer and calibration: whitened residual channels
/// stacked with the marker-visibility flag.
VecX build_recurrent_input(const ResidualRecord& physical,
                           const Vec3& vision_whitened, bool vision_used);

/// Everything logged per step; all-numeric so CSV round trips are exact.
struct StepLog {
    std::uint64_t step{0};
    int phase{0};  // MissionPhase as int
    bool attack_active{false};
    bool attack_falsified{false};
    Vec12 truth{Vec12::Zero()};
    Vec12 sys_estimate{Vec12::Zero()};
    Vec12 attacker_estimate{Vec12::Zero()};
    Vec12 deviation{Vec12::Zero()};
    VecX y{VecX::Zero(kStateDim)};
    VecX y_f{VecX::Zero(kStateDim)};
    Vec3 p_cam_true{Vec3::Zero()};
    Vec3 marker_earth{Vec3::Zero()};
    bool true_visible{false};
    Vec3 p_cam_seen{Vec3::Zero()};
    bool seen_visible{false};
    Vec2 obs_center_px{Vec2::Zero()};
    double obs_side_px{0.0};
    Vec12 phys_residual{Vec12::Zero()};
    double chi2_score{0.0};
    int chi2_df{0};
    bool chi2_alarm{false};
    double cusum_stat{0.0};
    bool cusum_alarm{false};
    double recurrent_score{0.0};
    bool recurrent_alarm{false};
    bool recurrent_armed{false};
    double vision_score{0.0};
    bool vision_gated{false};
    VecX recurrent_input{VecX::Zero(kRecurrentInputDim)};
    RotorCommand command{};
    bool saturated{false};
};

struct RunSummary {
    std::uint64_t steps{0};
    std::int64_t trigger_step{-1};
    std::int64_t attack_start{-1};
    std::int64_t attack_stop{-1};
    double peak_dev_xy{0.0};  // max horizontal marker offset after trigger
    double final_marker_dist_xy{0.0}; // earth-frame, at the last step
    double stop_dist_xy{0.0};         // marker offset when the attack ended
    bool landed{false};
    std::int64_t land_step{-1};
};

struct RunRecord {
    std::uint64_t seed{0};
    std::vector<StepLog> steps;
    RunSummary summary;
};

/// Simulation half: truth dynamics, ground vehicle, sensing and the true
/// camera channel.
class SimHalf {
  public:
    SimHalf(const ScenarioConfig& cfg, std::uint64_t seed);

    struct Output {
        Measurement y;
        MarkerObservation obs;
        Frame frame;
        State12 truth;
        Vec3 marker_earth;
        Vec3 p_cam_true;
        bool true_visible{false};
    };

    /// Emits the sensing for the current step (advances the noise streams).
    Output emit(std::uint64_t step);
    /// Advances the ground vehicle and the vehicle dynamics with command u.
    void advance(const RotorCommand& u);

    const State12& truth() const { return truth_; }
    const GroundVehicle& ground_vehicle() const { return gv_; }

  private:
    ScenarioConfig cfg_;
    State12 truth_;
    GroundVehicle gv_;
    GaussianRng process_rng_;
    GaussianRng sensor_rng_;
    GaussianRng camera_rng_;
    MeasurementModel model_;
    std::uint64_t steps_advanced_{0};
};

/// Controller half: system EKF with the vision residual channel, detectors,
/// FSM and the cascade controller.
class CtlHalf {
  public:
    CtlHalf(const ScenarioConfig& cfg, const Thresholds& thresholds,
            std::shared_ptr<const GruModel> recurrent_model);

    struct Output {
        RotorCommand command;
        bool saturated{false};
        MissionPhase phase{MissionPhase::kAscend};
        Vec12 estimate{Vec12::Zero()};
        Vec3 p_cam_seen{Vec3::Zero()};
        bool seen_visible{false};
        Vec12 phys_residual{Vec12::Zero()};
        double chi2_score{0.0};
        int chi2_df{0};
        bool chi2_alarm{false};
        double cusum_stat{0.0};
        bool cusum_alarm{false};
        double recurrent_score{0.0};
        bool recurrent_alarm{false};
        bool recurrent_armed{false};
        double vision_score{0.0};
        bool vision_gated{false};
        VecX recurrent_input{VecX::Zero(kRecurrentInputDim)};
        bool mission_complete{false};
    };

    Output step(std::uint64_t step, const Measurement& y,
                const MarkerObservation& obs);

    MissionPhase phase() const { return phase_; }
    const Ekf& filter() const { return filter_; }

  private:
    static constexpr int kTrackerWarmup = 50;

    ScenarioConfig cfg_;
    Thresholds thresholds_;
    Ekf filter_;
    MarkerTracker control_tracker_;
    MarkerTracker detect_tracker_;
    CascadeController controller_;
    CusumDetector cusum_;
    std::shared_ptr<const GruModel> recurrent_model_;
    std::optional<RecurrentScorer> recurrent_;
    MissionPhase phase_{MissionPhase::kAscend};
    RotorCommand prev_command_{};
    Vec2 hold_xy_{Vec2::Zero()};
    double vision_gate_{0.0};
    int tracker_updates_{0};
};

/// Deterministic closed-loop run; the attack engine (always instantiated,
/// pass-through when disabled) sits between the halves.
RunRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                       const Thresholds& thresholds,
                       std::shared_ptr<const GruModel> recurrent_model = {});

/// Convenience overload: analytic thresholds, no recurrent detector.
RunRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

struct MonteCarloReport {
    std::size_t runs{0};
    std::uint64_t base_seed{0};
    std::size_t aligned_len{0};
    double alpha{1.0};
    double epsilon{0.05};

    // Attack-enabled reports: nominal/attacked pairs per detector.
    std::optional<AlarmStats> chi2;
    std::optional<AlarmStats> cusum;
    std::optional<AlarmStats> recurrent;

    // Nominal alarm rates over all steps of the nominal runs.
    double nominal_chi2_rate{0.0};
    double nominal_cusum_rate{0.0};
    double nominal_recurrent_rate{0.0};
    std::size_t nominal_steps{0};

    // Effectiveness over attacked runs.
    double effective_fraction{0.0};   // runs with peak xy deviation >= alpha
    double mean_peak_dev{0.0};
    double mean_final_dist{0.0};
    double mean_stop_dist{0.0};
    double stop_dist_hit_fraction{0.0};  // runs with stop distance >= threshold
    double stop_dist_threshold{0.5};
    double landed_fraction{0.0};
    std::vector<std::int64_t> first_crossing_steps;
};

MonteCarloReport monte_carlo(const ScenarioConfig& cfg, int n_runs,
                             const Thresholds& thresholds,
                             std::shared_ptr<const GruModel> recurrent_model = {},
                             int n_threads = 0);

/// CSV export with a fixed, documented column order; floats use 17
/// significant digits so re-import reproduces values bitwise.
void export_run_csv(const RunRecord& record, const std::string& path);
std::vector<std::string> run_csv_header();

/// Numeric CSV reader (used by tests and the acceptance suite).
std::vector<std::vector<double>> read_csv_numeric(
    const std::string& path, std::vector<std::string>* header = nullptr);

void export_report(const MonteCarloReport& report, const std::string& dir);
void export_run_summary(const RunRecord& record, const std::string& path);

/// Minimal SVG plots: xy trajectory and per-step alarm rates.
void write_trajectory_svg(const RunRecord& record, const ScenarioConfig& cfg,
                          const std::string& path);
void write_alarm_svg(const MonteCarloReport& report, const std::string& path);

}  // namespace mirage
