#include "mirage/sensing.hpp"

#include <doctest.h>

#include <cmath>

using namespace mirage;

TEST_CASE("default measurement model is the identity selection") {
    const MeasurementModel h = MeasurementModel::identity();
    State12 x;
    CHECK(h(x).isZero(0.0));

    x.position = Vec3{1, 2, 3};
    x.velocity = Vec3{-1, 0.5, 0};
    x.attitude = {0.1, 0.2, 0.3};
    x.body_rates = Vec3{4, 5, 6};
    CHECK(h(x) == VecX(x.to_vector()));

    // Linearity of the default: h(x - s) - h(x) = -s.
    Vec12 s;
    s << 0.1, -0.2, 0.3, 0, 0, 0, 0.01, 0, 0, 0, 0, 0;
    const State12 shifted = State12::from_vector(Vec12(x.to_vector() - s));
    CHECK((h(shifted) - h(x) + s).norm() < 1e-15);
}

TEST_CASE("custom nonlinear model: appended range channel") {
    MeasurementModel h;
    h.dim = kStateDim + 1;
    h.h = [](const State12& x) {
        VecX v(kStateDim + 1);
        v.head<kStateDim>() = x.to_vector();
        v[kStateDim] = x.position.norm();
        return v;
    };
    State12 x;
    x.position = Vec3{3, 4, 0};
    CHECK(h(x)[kStateDim] == doctest::Approx(5.0));
}

TEST_CASE("measure adds per-channel Gaussian noise") {
    State12 x;
    x.position = Vec3{1, -2, 3};
    const MeasurementModel h = MeasurementModel::identity();

    SUBCASE("degenerate noise returns h(x)") {
        GaussianRng rng(1);
        const VecX tiny = VecX::Constant(kStateDim, 1e-300);
        const Measurement m = measure(x, h, tiny, rng, 0);
        CHECK((m.values - h(x)).norm() < 1e-290);
    }

    SUBCASE("identical seeds give identical samples") {
        SensorNoiseParams noise;
        GaussianRng a(42), b(42);
        const Measurement ma = measure(x, h, noise, a, 3);
        const Measurement mb = measure(x, h, noise, b, 3);
        CHECK(ma.values == mb.values);
        CHECK(ma.step == 3);
    }

    SUBCASE("dimension mismatch rejected") {
        GaussianRng rng(1);
        CHECK_THROWS_AS(measure(x, h, VecX::Ones(3), rng, 0), ConfigError);
    }
}

TEST_CASE("sample mean and variance match the configured noise") {
    State12 x;
    x.position = Vec3{2, 0, 5};
    const MeasurementModel h = MeasurementModel::identity();
    SensorNoiseParams noise;
    GaussianRng rng(2024);

    const int n = 100000;
    VecX sum = VecX::Zero(kStateDim);
    VecX sum_sq = VecX::Zero(kStateDim);
    for (int i = 0; i < n; ++i) {
        const VecX v = measure(x, h, noise, rng, 0).values - h(x);
        sum += v;
        sum_sq += v.cwiseProduct(v);
    }
    const VecX mean = sum / n;
    const VecX var = sum_sq / n - mean.cwiseProduct(mean);
    const VecX stds = noise.channel_stds();
    for (int c = 0; c < kStateDim; ++c) {
        // Law of large numbers: mean within 4 sigma / sqrt(n).
        CHECK(std::abs(mean[c]) < 4.0 * stds[c] / std::sqrt(double(n)));
        // Empirical variance within 5% of configured.
        CHECK(var[c] == doctest::Approx(stds[c] * stds[c]).epsilon(0.05));
    }
}
