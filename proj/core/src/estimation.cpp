#include "mirage/estimation.hpp"

#include "mirage/frames.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace mirage {

MatX numeric_jacobian(const std::function<VecX(const VecX&)>& fn,
                      const VecX& point, double eps) {
    if (eps <= 0.0) throw ConfigError("numeric_jacobian: eps must be positive");
    const VecX f0 = fn(point);
    MatX jac(f0.size(), point.size());
    VecX probe = point;
    for (Eigen::Index c = 0; c < point.size(); ++c) {
        probe[c] = point[c] + eps;
        const VecX hi = fn(probe);
        probe[c] = point[c] - eps;
        const VecX lo = fn(probe);
        probe[c] = point[c];
        jac.col(c) = (hi - lo) / (2.0 * eps);
    }
    return jac;
}

Ekf::Ekf(const VehicleParams& vehicle, MeasurementModel model, EkfParams params,
         double dt)
    : vehicle_(vehicle), model_(std::move(model)), params_(std::move(params)),
      dt_(dt) {}

void Ekf::initialize(const Vec12& mean, std::uint64_t step) {
    belief_.mean = mean;
    belief_.covariance = params_.initial_cov_diag.asDiagonal();
    belief_.step = step;
    initialized_ = true;
}

void Ekf::predict(const RotorCommand& u) {
    const auto f = [&](const VecX& v) -> VecX {
        const Vec12 v12 = v;
        return step(State12::from_vector(v12), u, dt_, vehicle_).to_vector();
    };
    const MatX jac = numeric_jacobian(f, belief_.mean, params_.jacobian_eps);
    belief_.mean = f(belief_.mean);
    belief_.covariance =
        jac * belief_.covariance * jac.transpose() + params_.process_noise_cov;
    belief_.step += 1;
}

namespace {

// Wraps the attitude channels of a default-model residual into (-pi, pi].
void wrap_attitude_channels(VecX& r) {
    if (r.size() >= kIdxAtt + 3) {
        for (int i = kIdxAtt; i < kIdxAtt + 3; ++i) r[i] = wrap_angle(r[i]);
    }
}

}  // namespace

ResidualRecord Ekf::update(const Measurement& y) {
    const VecX predicted = model_(belief_.state());
    if (y.values.size() != predicted.size()) {
        throw ConfigError("ekf update: measurement dimension mismatch");
    }
    VecX r = y.values - predicted;
    if (model_.dim == kStateDim) wrap_attitude_channels(r);

    // Default model: H is the identity selection (analytic Jacobian).
    MatX h_jac;
    if (model_.dim == kStateDim) {
        h_jac = MatX::Identity(kStateDim, kStateDim);
    } else {
        const auto hf = [&](const VecX& v) -> VecX {
            const Vec12 v12 = v;
            return model_(State12::from_vector(v12));
        };
        h_jac = numeric_jacobian(hf, belief_.mean, params_.jacobian_eps);
    }

    const MatX noise_cov =
        params_.measurement_noise_std.array().square().matrix().asDiagonal();
    const MatX s = h_jac * belief_.covariance * h_jac.transpose() + noise_cov;
    Eigen::LDLT<MatX> solver(s);
    if (solver.info() != Eigen::Success || !solver.isPositive()) {
        throw SimulationError("ekf update: innovation covariance not PD");
    }
    const MatX gain = belief_.covariance * h_jac.transpose() *
                      solver.solve(MatX::Identity(s.rows(), s.cols()));

    belief_.mean += gain * r;
    const MatX ikh =
        MatX::Identity(kStateDim, kStateDim) - gain * h_jac;
    belief_.covariance = ikh * belief_.covariance * ikh.transpose() +
                         gain * noise_cov * gain.transpose();
    belief_.step = y.step;

    ResidualRecord rec;
    rec.residual = r;
    rec.innovation_cov = s;
    rec.step = y.step;
    return rec;
}

ResidualRecord Ekf::update_custom(const VecX& z,
                                  const std::function<VecX(const Vec12&)>& h,
                                  const MatX& noise_cov,
                                  std::optional<double> gate, bool* accepted) {
    const auto hf = [&](const VecX& v) -> VecX {
        const Vec12 v12 = v;
        return h(v12);
    };
    const VecX r = z - h(belief_.mean);
    const MatX h_jac = numeric_jacobian(hf, belief_.mean, params_.jacobian_eps);
    const MatX s = h_jac * belief_.covariance * h_jac.transpose() + noise_cov;
    Eigen::LDLT<MatX> solver(s);
    if (solver.info() != Eigen::Success || !solver.isPositive()) {
        throw SimulationError("ekf custom update: innovation covariance not PD");
    }

    ResidualRecord rec;
    rec.residual = r;
    rec.innovation_cov = s;
    rec.step = belief_.step;

    const double d2 = r.dot(solver.solve(r));
    const bool take = !gate || d2 <= *gate;
    if (accepted) *accepted = take;
    if (take) {
        const MatX gain = belief_.covariance * h_jac.transpose() *
                          solver.solve(MatX::Identity(s.rows(), s.cols()));
        belief_.mean += gain * r;
        const MatX ikh =
            MatX::Identity(kStateDim, kStateDim) - gain * h_jac;
        belief_.covariance = ikh * belief_.covariance * ikh.transpose() +
                             gain * noise_cov * gain.transpose();
    }
    return rec;
}

void MarkerTracker::predict() {
    if (!initialized_) return;
    Eigen::Matrix<double, 6, 6> f = Eigen::Matrix<double, 6, 6>::Identity();
    f.topRightCorner<3, 3>() = dt_ * Mat3::Identity();
    // White-acceleration process noise for the constant-velocity model.
    const double q = params_.accel_psd;
    Eigen::Matrix<double, 6, 6> qm = Eigen::Matrix<double, 6, 6>::Zero();
    qm.topLeftCorner<3, 3>() =
        (q * dt_ * dt_ * dt_ / 3.0) * Mat3::Identity();
    qm.topRightCorner<3, 3>() = (q * dt_ * dt_ / 2.0) * Mat3::Identity();
    qm.bottomLeftCorner<3, 3>() = (q * dt_ * dt_ / 2.0) * Mat3::Identity();
    qm.bottomRightCorner<3, 3>() = (q * dt_) * Mat3::Identity();
    state_ = f * state_;
    cov_ = f * cov_ * f.transpose() + qm;
    // Congruence scaling keeps the capped covariance positive semidefinite.
    double scale_p = 1.0, scale_v = 1.0;
    if (params_.cap_pos_std > 0.0) {
        const double max_p = cov_.topLeftCorner<3, 3>().diagonal().maxCoeff();
        const double cap = params_.cap_pos_std * params_.cap_pos_std;
        if (max_p > cap) scale_p = std::sqrt(cap / max_p);
    }
    if (params_.cap_vel_std > 0.0) {
        const double max_v = cov_.bottomRightCorner<3, 3>().diagonal().maxCoeff();
        const double cap = params_.cap_vel_std * params_.cap_vel_std;
        if (max_v > cap) scale_v = std::sqrt(cap / max_v);
    }
    if (scale_p < 1.0 || scale_v < 1.0) {
        Eigen::Matrix<double, 6, 1> d;
        d << scale_p, scale_p, scale_p, scale_v, scale_v, scale_v;
        cov_ = d.asDiagonal() * cov_ * d.asDiagonal();
    }
}

double MarkerTracker::update(const Vec3& apparent_pos,
                             std::optional<double> gate) {
    if (!initialized_) {
        state_.head<3>() = apparent_pos;
        state_.tail<3>().setZero();
        cov_.setZero();
        cov_.topLeftCorner<3, 3>() =
            params_.init_pos_std * params_.init_pos_std * Mat3::Identity();
        cov_.bottomRightCorner<3, 3>() =
            params_.init_vel_std * params_.init_vel_std * Mat3::Identity();
        initialized_ = true;
        return 0.0;
    }
    Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
    h.leftCols<3>() = Mat3::Identity();
    const Mat3 noise =
        params_.meas_std * params_.meas_std * Mat3::Identity();
    const Vec3 r = apparent_pos - state_.head<3>();
    const Mat3 s = h * cov_ * h.transpose() + noise;
    const Mat3 s_inv = s.llt().solve(Mat3::Identity());
    const double d2 = r.dot(s_inv * r);
    if (gate && d2 > *gate) return d2;
    const Eigen::Matrix<double, 6, 3> gain = cov_ * h.transpose() * s_inv;
    state_ += gain * r;
    const Eigen::Matrix<double, 6, 6> ikh =
        Eigen::Matrix<double, 6, 6>::Identity() - gain * h;
    cov_ = ikh * cov_ * ikh.transpose() + gain * noise * gain.transpose();
    return d2;
}

}  // namespace mirage
