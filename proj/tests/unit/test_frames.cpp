#include "mirage/frames.hpp"

#include <doctest.h>

#include <random>

using namespace mirage;

TEST_CASE("hat maps vectors to cross-product matrices") {
    const Mat3 h = hat(Vec3{0, 0, 1});
    const Vec3 r = h * Vec3{1, 0, 0};
    CHECK(r.isApprox(Vec3{0, 1, 0}, 1e-15));

    CHECK(hat(Vec3::Zero()).isZero(0.0));

    const Vec3 v{1, 2, 3};
    CHECK((hat(v) * v).norm() == doctest::Approx(0.0));
    CHECK((hat(v) + hat(v).transpose()).isZero(0.0));
}

TEST_CASE("hat antisymmetry property: hat(v)w + hat(w)v = 0") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-5.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 v{d(rng), d(rng), d(rng)};
        const Vec3 w{d(rng), d(rng), d(rng)};
        CHECK((hat(v) * w + hat(w) * v).norm() < 1e-12);
    }
}

TEST_CASE("euler_to_rotation basics") {
    CHECK(euler_to_rotation({0, 0, 0}).isApprox(Mat3::Identity(), 1e-15));

    // Pure yaw of pi/2 maps body x onto earth y.
    const Mat3 r = euler_to_rotation({0, 0, M_PI / 2});
    CHECK((r * Vec3{1, 0, 0} - Vec3{0, 1, 0}).norm() < 1e-12);

    const EulerAngles e{0.1, -0.2, 0.3};
    const EulerAngles back = rotation_to_euler(euler_to_rotation(e));
    CHECK(back.roll == doctest::Approx(e.roll).epsilon(1e-9));
    CHECK(back.pitch == doctest::Approx(e.pitch).epsilon(1e-9));
    CHECK(back.yaw == doctest::Approx(e.yaw).epsilon(1e-9));
}

TEST_CASE("rotation matrices stay orthonormal over random gimbal-safe angles") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(-1.3, 1.3);
    for (int i = 0; i < 10000; ++i) {
        const Mat3 r =
            euler_to_rotation({angle(rng), angle(rng) * 0.9, angle(rng)});
        CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-9);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("earth_to_camera composition") {
    // Hover at zero attitude with the down-facing mount: earth -z maps to
    // camera +z.
    State12 x;
    const Mat3 r = earth_to_camera(x, CameraMount::down_facing());
    CHECK((r * Vec3{0, 0, -1} - Vec3{0, 0, 1}).norm() < 1e-15);

    // Zero mount rotation and zero attitude give the identity.
    CameraMount plain;
    CHECK(earth_to_camera(x, plain).isApprox(Mat3::Identity(), 1e-15));

    // Orthonormal for a random state, and composing with the body rotation
    // recovers the fixed mount rotation exactly.
    x.attitude = {0.4, -0.3, 1.2};
    const CameraMount mount = CameraMount::down_facing();
    const Mat3 rc = earth_to_camera(x, mount);
    CHECK((rc.transpose() * rc - Mat3::Identity()).norm() < 1e-12);
    CHECK((rc * euler_to_rotation(x.attitude) - mount.rotation).norm() < 1e-12);
}

TEST_CASE("wrap_angle stays in (-pi, pi]") {
    CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(3 * M_PI / 2) == doctest::Approx(-M_PI / 2));
    CHECK(wrap_angle(0.3) == doctest::Approx(0.3));
}
