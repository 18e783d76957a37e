// Shared value types for the quadcopter simulation and attack toolkit.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace mirage {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Z-Y-X (yaw-pitch-roll) Euler angles, radians.
struct EulerAngles {
    double roll{0.0};
    double pitch{0.0};
    double yaw{0.0};
};

/// Full vehicle state: position and velocity in the earth frame,
/// attitude as Euler angles, angular rates in the body frame.
/// Vector layout: [x y z vx vy vz roll pitch yaw p q r].
struct State12 {
    Vec3 position{Vec3::Zero()};     // m, earth frame
    Vec3 velocity{Vec3::Zero()};     // m/s, earth frame
    EulerAngles attitude{};          // rad
    Vec3 body_rates{Vec3::Zero()};   // rad/s, body frame

    Vec12 to_vector() const {
        Vec12 v;
        v << position, velocity, attitude.roll, attitude.pitch, attitude.yaw,
            body_rates;
        return v;
    }

    static State12 from_vector(const Vec12& v) {
        State12 s;
        s.position = v.segment<3>(0);
        s.velocity = v.segment<3>(3);
        s.attitude = EulerAngles{v[6], v[7], v[8]};
        s.body_rates = v.segment<3>(9);
        return s;
    }
};

// State vector channel indices.
inline constexpr int kIdxPos = 0;
inline constexpr int kIdxVel = 3;
inline constexpr int kIdxAtt = 6;
inline constexpr int kIdxRate = 9;
inline constexpr int kStateDim = 12;

/// Raised when the simulation leaves its valid envelope (gimbal proximity,
/// state divergence). Carries the step index when known.
class SimulationError : public std::runtime_error {
  public:
    explicit SimulationError(const std::string& what, std::int64_t step = -1)
        : std::runtime_error(what), step_(step) {}
    std::int64_t step() const { return step_; }

  private:
    std::int64_t step_;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace mirage
