#include "mirage/attack.hpp"
#include "mirage/dynamics.hpp"

#include <benchmark/benchmark.h>

using namespace mirage;

static void RK4Step(benchmark::State& state) {
    VehicleParams p;
    State12 x;
    x.position = Vec3{0, 0, 5};
    x.velocity = Vec3{0.5, -0.2, 0.1};
    x.attitude = {0.05, -0.02, 0.4};
    const RotorCommand u = hover_command(p);
    for (auto _ : state) {
        x = step(x, u, 0.02, p);
        benchmark::DoNotOptimize(x);
        x.position.z() = 5.0;  // keep the state bounded
    }
}
BENCHMARK(RK4Step);

static void MixerRoundTrip(benchmark::State& state) {
    VehicleParams p;
    WrenchBody w;
    w.thrust = p.mass * p.gravity;
    w.torque = Vec3{0.01, -0.02, 0.001};
    for (auto _ : state) {
        const MixResult r = inverse_mixer(w, p);
        benchmark::DoNotOptimize(mixer(r.command, p));
    }
}
BENCHMARK(MixerRoundTrip);

static void DeviationPropagation(benchmark::State& state) {
    VehicleParams p;
    const auto f = [&](const Vec12& x, const RotorCommand& u) -> Vec12 {
        return step(State12::from_vector(x), u, 0.02, p).to_vector();
    };
    State12 x;
    x.position = Vec3{0, 0, 5};
    Vec12 s = Vec12::Zero();
    s[kIdxAtt] = 0.01;
    const Vec12 xhat = x.to_vector();
    const RotorCommand u = hover_command(p);
    for (auto _ : state) {
        benchmark::DoNotOptimize(propagate_deviation(s, xhat, u, f));
    }
}
BENCHMARK(DeviationPropagation);
