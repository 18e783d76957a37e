// EKF sensor fusion producing state estimates and residuals. Two instances
// run per simulation: the system filter (possibly falsified data) and the
// attacker filter (true data).
#pragma once

#include "mirage/dynamics.hpp"
#include "mirage/sensing.hpp"
#include "mirage/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace mirage {

struct BeliefState {
    Vec12 mean{Vec12::Zero()};
    Mat12 covariance{Mat12::Zero()};
    std::uint64_t step{0};

    State12 state() const { return State12::from_vector(mean); }
};

/// Innovation and its covariance, the signal every detector consumes.
struct ResidualRecord {
    VecX residual;
    MatX innovation_cov;
    std::uint64_t step{0};
};

/// Central-difference Jacobian, one column per input dimension.
MatX numeric_jacobian(const std::function<VecX(const VecX&)>& fn,
                      const VecX& point, double eps = 1e-6);

struct EkfParams {
    Mat12 process_noise_cov{Mat12::Zero()};   // Q
    VecX measurement_noise_std;               // per channel, for R
    Vec12 initial_cov_diag{Vec12::Zero()};    // P0
    double jacobian_eps{1e-6};
};

/// Extended Kalman filter over the vehicle dynamics with the pluggable
/// measurement model. Angle channels of the default model are wrapped when
/// forming residuals. Updates use the Joseph form to keep P symmetric PSD.
class Ekf {
  public:
    Ekf(const VehicleParams& vehicle, MeasurementModel model, EkfParams params,
        double dt);

    /// Initializes the belief from a first measurement (identity model) or a
    /// known state vector.
    void initialize(const Vec12& mean, std::uint64_t step);
    bool initialized() const { return initialized_; }

    /// Mean propagated by the noiseless step, covariance by F P F^T + Q with
    /// F the numeric Jacobian of step at (mean, u).
    void predict(const RotorCommand& u);

    /// Standard EKF measurement update; returns the innovation and its
    /// covariance for the detectors.
    ResidualRecord update(const Measurement& y);

    /// Extra update stage against an arbitrary measurement function with an
    /// explicit noise covariance (used for the vision channel). When `gate`
    /// is set and the normalized innovation exceeds it, the update is
    /// skipped; the residual is returned either way.
    ResidualRecord update_custom(const VecX& z,
                                 const std::function<VecX(const Vec12&)>& h,
                                 const MatX& noise_cov,
                                 std::optional<double> gate = std::nullopt,
                                 bool* accepted = nullptr);

    const BeliefState& belief() const { return belief_; }
    BeliefState& belief() { return belief_; }
    const MeasurementModel& model() const { return model_; }

    /// Predicted measurement h(mean).
    VecX predicted_measurement() const { return model_(belief_.state()); }

  private:
    VehicleParams vehicle_;
    MeasurementModel model_;
    EkfParams params_;
    double dt_;
    BeliefState belief_;
    bool initialized_{false};
};

/// Constant-velocity Kalman tracker over the marker's earth position.
/// Used by the attacker to ride out frames where the marker leaves view and
/// by the system as the reference for the vision residual channel.
class MarkerTracker {
  public:
    struct Params {
        double accel_psd{12.0};     // white-accel intensity, m^2/s^3
        double meas_std{0.03};      // position measurement noise, m
        double init_pos_std{1.0};
        double init_vel_std{2.0};
        // Coast-covariance caps (0 disables): bound the position/velocity
        // uncertainty growth so a rejected track cannot re-open the gate.
        double cap_pos_std{0.0};
        double cap_vel_std{0.0};
    };

    MarkerTracker(Params params, double dt) : params_(params), dt_(dt) {}

    bool initialized() const { return initialized_; }
    void predict();
    /// Measurement update with an apparent earth position. Returns the
    /// normalized innovation (d^2 = r^T S^-1 r); when `gate` is set and
    /// exceeded the update is skipped.
    double update(const Vec3& apparent_pos,
                  std::optional<double> gate = std::nullopt);

    Vec3 position() const { return state_.head<3>(); }
    Vec3 velocity() const { return state_.tail<3>(); }
    Eigen::Matrix3d position_cov() const {
        return cov_.topLeftCorner<3, 3>();
    }

  private:
    Params params_;
    double dt_;
    Eigen::Matrix<double, 6, 1> state_{Eigen::Matrix<double, 6, 1>::Zero()};
    Eigen::Matrix<double, 6, 6> cov_{Eigen::Matrix<double, 6, 6>::Zero()};
    bool initialized_{false};
};

}  // namespace mirage
