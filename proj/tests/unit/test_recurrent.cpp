#include "mirage/recurrent.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace mirage;

namespace {

MatX random_window(int steps, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    MatX w(steps, dim);
    for (int r = 0; r < steps; ++r)
        for (int c = 0; c < dim; ++c) w(r, c) = n(rng);
    return w;
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    GruModel m = GruModel::random_init(3, 4, 2, 99);
    const MatX window = random_window(4, 3, 5);

    double loss = 0.0;
    const VecX analytic = gru_window_gradient(m, window, &loss);
    CHECK(loss == doctest::Approx(gru_window_loss(m, window)).epsilon(1e-12));

    VecX theta = m.flatten();
    VecX fd(theta.size());
    const double eps = 1e-6;
    GruModel probe = m;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        VecX t = theta;
        t[i] += eps;
        probe.unflatten(t);
        const double hi = gru_window_loss(probe, window);
        t[i] = theta[i] - eps;
        probe.unflatten(t);
        const double lo = gru_window_loss(probe, window);
        fd[i] = (hi - lo) / (2.0 * eps);
    }
    const double rel = (analytic - fd).norm() / std::max(1e-12, fd.norm());
    CHECK(rel < 1e-4);
}

TEST_CASE("training on constant-zero traces drives loss and threshold to zero") {
    std::vector<MatX> traces(4, MatX::Zero(200, 3));
    TrainHyperParams hp;
    hp.window = 10;
    hp.stride = 5;
    hp.epochs = 3;
    hp.hidden = 6;
    hp.learning_rate = 5e-3;
    const TrainResult r = train_recurrent(traces, hp, 0.01);
    CHECK(r.final_loss < 1e-3);
    CHECK(r.threshold < 0.05);
}

TEST_CASE("holdout alarm rate matches the quantile construction") {
    std::vector<MatX> traces;
    for (int i = 0; i < 8; ++i) {
        traces.push_back(random_window(400, 4, 100 + static_cast<std::uint64_t>(i)));
    }
    TrainHyperParams hp;
    hp.window = 10;
    hp.stride = 5;
    hp.epochs = 2;
    hp.hidden = 8;
    const double p_fa = 0.01;
    const TrainResult r = train_recurrent(traces, hp, p_fa);
    CHECK(std::abs(r.holdout_alarm_rate - p_fa) <= 0.005);
}

TEST_CASE("scoring is deterministic given fixed weights") {
    const GruModel m = GruModel::random_init(3, 5, 2, 7);
    const MatX window = random_window(12, 3, 21);
    const double a = gru_score(m, window);
    const double b = gru_score(m, window);
    CHECK(a == b);

    CHECK_THROWS_AS(gru_score(m, random_window(1, 3, 1)), ConfigError);
}

TEST_CASE("weights serialize to a flat little-endian vector with header") {
    GruModel m = GruModel::random_init(4, 6, 3, 13);
    const std::string path =
        (std::filesystem::temp_directory_path() / "mirage_gru.bin").string();
    m.save(path);

    const GruModel back = GruModel::load(path);
    CHECK(back.input_dim == m.input_dim);
    CHECK(back.hidden_dim == m.hidden_dim);
    CHECK(back.output_dim == m.output_dim);
    CHECK(back.flatten() == m.flatten());  // bitwise

    // Header sanity: magic + version + dims + count, then raw doubles.
    std::ifstream in(path, std::ios::binary);
    std::uint32_t magic = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    CHECK(magic == 0x4d524e31);
    std::remove(path.c_str());
}

TEST_CASE("rolling scorer arms after two samples") {
    const GruModel m = GruModel::random_init(3, 4, 2, 3);
    RecurrentScorer scorer(m, 0.5, 6);
    auto [s0, a0] = scorer.push(VecX::Zero(3));
    CHECK(s0 == 0.0);
    CHECK_FALSE(a0);
    auto [s1, a1] = scorer.push(VecX::Ones(3));
    CHECK(s1 >= 0.0);
}
