#include "mirage/config.hpp"
#include "mirage/estimation.hpp"
#include "mirage/recurrent.hpp"
#include "mirage/scenario.hpp"

#include <benchmark/benchmark.h>

using namespace mirage;

static void EkfPredictUpdate(benchmark::State& state) {
    const ScenarioConfig cfg = ScenarioConfig::defaults(Mission::kGvt);
    Ekf ekf(cfg.vehicle, MeasurementModel::identity(), cfg.ekf_params(), cfg.dt);
    State12 x;
    x.position = Vec3{0, 0, 5};
    ekf.initialize(x.to_vector(), 0);
    const RotorCommand u = hover_command(cfg.vehicle);
    Measurement y;
    y.values = x.to_vector();
    for (auto _ : state) {
        ekf.predict(u);
        y.step += 1;
        benchmark::DoNotOptimize(ekf.update(y));
    }
}
BENCHMARK(EkfPredictUpdate);

static void RecurrentScore(benchmark::State& state) {
    const GruModel model = GruModel::random_init(16, 32, 15, 4);
    MatX window(20, 16);
    window.setRandom();
    for (auto _ : state) {
        benchmark::DoNotOptimize(gru_score(model, window));
    }
}
BENCHMARK(RecurrentScore);

static void FullScenarioStep(benchmark::State& state) {
    // Amortized cost of one closed-loop step including the camera channel.
    ScenarioConfig cfg = ScenarioConfig::defaults(Mission::kGvt);
    cfg.duration = 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_scenario(cfg, 1));
    }
    state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(FullScenarioStep)->Unit(benchmark::kMillisecond);
