#include "mirage/frames.hpp"

#include <cmath>

namespace mirage {

Mat3 hat(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
        -v.y(), v.x(), 0;
    return m;
}

Mat3 euler_to_rotation(const EulerAngles& e) {
    const double cr = std::cos(e.roll), sr = std::sin(e.roll);
    const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
    const double cy = std::cos(e.yaw), sy = std::sin(e.yaw);
    Mat3 r;
    r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp, cp * sr, cp * cr;
    return r;
}

EulerAngles rotation_to_euler(const Mat3& r) {
    EulerAngles e;
    e.pitch = std::asin(-std::clamp(r(2, 0), -1.0, 1.0));
    e.roll = std::atan2(r(2, 1), r(2, 2));
    e.yaw = std::atan2(r(1, 0), r(0, 0));
    return e;
}

Mat3 earth_to_camera(const State12& x, const CameraMount& mount) {
    return mount.rotation * euler_to_rotation(x.attitude).transpose();
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a > M_PI) a -= two_pi;
    if (a <= -M_PI) a += two_pi;
    return a;
}

}  // namespace mirage
