// Rotation and reference-frame utilities shared by dynamics, perception,
// estimation and the attack engine.
//
// Conventions (used everywhere in this project):
//   earth frame: x/y horizontal, z up; body frame: x forward, y left, z up;
//   camera frame: optical axis +z pointing down at zero attitude with the
//   default down-facing mount, image x right, image y = -body y.
#pragma once

#include "mirage/types.hpp"

namespace mirage {

/// Maps a 3-vector to the skew-symmetric matrix so that hat(v) * w = v x w.
Mat3 hat(const Vec3& v);

/// Body -> earth rotation for Z-Y-X Euler angles: R = Rz(yaw)Ry(pitch)Rx(roll).
Mat3 euler_to_rotation(const EulerAngles& e);

/// Inverse of euler_to_rotation on the gimbal-safe envelope |pitch| < pi/2.
EulerAngles rotation_to_euler(const Mat3& r);

/// Fixed camera mounting: rotation body -> camera plus a translation offset
/// from the center of gravity, expressed in the body frame (meters).
struct CameraMount {
    Mat3 rotation{Mat3::Identity()};
    Vec3 offset{Vec3::Zero()};

    /// Down-facing camera: 180 degree rotation about body x, so that at zero
    /// attitude earth -z maps to camera +z and body x stays image x.
    static CameraMount down_facing() {
        CameraMount m;
        m.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
        return m;
    }
};

/// Rotation from the earth frame to the camera frame for a given state:
/// mount rotation composed with the transpose of the body->earth rotation.
Mat3 earth_to_camera(const State12& x, const CameraMount& mount);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace mirage
