#include "mirage/perception.hpp"

#include <benchmark/benchmark.h>

using namespace mirage;

static void RenderMarker(benchmark::State& state) {
    CameraModel cam;
    MarkerObservation obs;
    obs.center = Vec2{42.5, -17.25};
    obs.side_px = static_cast<double>(state.range(0));
    obs.visible = true;
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_marker(obs, cam));
    }
}
BENCHMARK(RenderMarker)->Arg(40)->Arg(80)->Arg(200);

static void DetectMarker(benchmark::State& state) {
    CameraModel cam;
    MarkerObservation obs;
    obs.center = Vec2{42.5, -17.25};
    obs.side_px = static_cast<double>(state.range(0));
    obs.visible = true;
    const Frame f = render_marker(obs, cam);
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect_marker(f));
    }
}
BENCHMARK(DetectMarker)->Arg(40)->Arg(80)->Arg(200);

static void RenderDetectEstimate(benchmark::State& state) {
    CameraModel cam;
    MarkerObservation obs;
    obs.center = Vec2{100.0, 50.0};
    obs.side_px = 80.0;
    obs.visible = true;
    for (auto _ : state) {
        const MarkerObservation got = detect_marker(render_marker(obs, cam));
        benchmark::DoNotOptimize(estimate_relative_position(got, cam, 0.5));
    }
}
BENCHMARK(RenderDetectEstimate);
