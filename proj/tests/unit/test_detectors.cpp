#include "mirage/detectors.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace mirage;

TEST_CASE("chi-square quantiles reproduce tabulated values") {
    // Frozen reference quantiles (standard chi-square tables).
    CHECK(chi2_quantile(1, 0.99) == doctest::Approx(6.63489660).epsilon(1e-7));
    CHECK(chi2_quantile(12, 0.99) == doctest::Approx(26.21696731).epsilon(1e-7));
    CHECK(chi2_quantile(15, 0.99) == doctest::Approx(30.57791417).epsilon(1e-7));
    CHECK(chi2_quantile(3, 0.999) == doctest::Approx(16.26623620).epsilon(1e-7));
    CHECK(chi2_quantile(12, 0.95) == doctest::Approx(21.02606982).epsilon(1e-7));

    // CDF/quantile are inverse.
    for (int df : {1, 3, 12, 15}) {
        for (double p : {0.5, 0.9, 0.99}) {
            CHECK(chi2_cdf(chi2_quantile(df, p), df) ==
                  doctest::Approx(p).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(chi2_quantile(12, 0.0), ConfigError);
    CHECK_THROWS_AS(chi2_quantile(12, 1.0), ConfigError);
}

TEST_CASE("chi2 threshold at p_fa 0.01 yields a 1 percent alarm rate") {
    // Monte Carlo check of the quantile: 1e5 draws of a 12-dof quadratic
    // form of standard normals.
    const double tau = chi2_quantile(12, 0.99);
    std::mt19937_64 rng(123);
    std::normal_distribution<double> n(0.0, 1.0);
    int alarms = 0;
    const int trials = 100000;
    for (int i = 0; i < trials; ++i) {
        double score = 0.0;
        for (int c = 0; c < 12; ++c) {
            const double v = n(rng);
            score += v * v;
        }
        alarms += score > tau ? 1 : 0;
    }
    const double rate = static_cast<double>(alarms) / trials;
    CHECK(rate == doctest::Approx(0.01).epsilon(0.3));
    CHECK(std::abs(rate - 0.01) < 0.003);
}

TEST_CASE("chi2 score is the weighted residual norm") {
    const VecX zero = VecX::Zero(3);
    CHECK(chi2_score(zero, MatX::Identity(3, 3)) == doctest::Approx(0.0));

    // Scalar residual of 3 with unit covariance scores exactly 9; the
    // verdict uses a strict inequality so a threshold of 9 does not alarm.
    VecX r = VecX::Constant(1, 3.0);
    const double score = chi2_score(r, MatX::Identity(1, 1));
    CHECK(score == doctest::Approx(9.0));
    Chi2Detector det;
    det.set_threshold(1, 9.0);
    CHECK_FALSE(det.evaluate(score, 1, 0).alarm);
    CHECK(det.evaluate(score + 1e-9, 1, 0).alarm);

    MatX bad = MatX::Zero(2, 2);
    bad(0, 0) = 1.0;
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(chi2_score(VecX::Ones(2), bad), SimulationError);
}

TEST_CASE("cusum accumulates excesses above mean plus drift") {
    CusumDetector det(2.0, 10.0);

    // Scores at the nominal mean keep the statistic at zero.
    for (int i = 0; i < 100; ++i) {
        const DetectorVerdict v = det.step(12.0, 12.0, static_cast<std::uint64_t>(i));
        CHECK(v.score == 0.0);
        CHECK_FALSE(v.alarm);
    }

    // Constant elevation of delta above mean + drift alarms after
    // ceil(threshold / delta) steps and then resets.
    const double delta = 3.0;
    int steps_to_alarm = 0;
    for (int i = 0; i < 100; ++i) {
        ++steps_to_alarm;
        if (det.step(12.0 + 2.0 + delta, 12.0, static_cast<std::uint64_t>(i)).alarm) {
            break;
        }
    }
    CHECK(steps_to_alarm == 4);  // ceil(10 / 3) = 4
    CHECK(det.statistic() == 0.0);

    // The statistic never goes negative.
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 4.0);
    CusumDetector noisy(2.0, 50.0);
    for (int i = 0; i < 2000; ++i) {
        noisy.step(12.0 + n(rng), 12.0, static_cast<std::uint64_t>(i));
        CHECK(noisy.statistic() >= 0.0);
    }

    CusumDetector bad(0.0, 10.0);
    CHECK_THROWS_AS(bad.step(1.0, 0.0, 0), ConfigError);
}

TEST_CASE("evaluate_stealthiness counts alarm rates") {
    // 1 alarm in 100 nominal windows, 1 in 100 attacked windows.
    std::vector<std::vector<bool>> nominal(100, std::vector<bool>(10, false));
    std::vector<std::vector<bool>> attacked(100, std::vector<bool>(10, false));
    nominal[3][4] = true;
    attacked[7][5] = true;
    const AlarmStats stats = evaluate_stealthiness(nominal, attacked, 0.05);
    CHECK(stats.p_fa == doctest::Approx(0.001));
    CHECK(stats.p_td == doctest::Approx(1.0 / 900.0));
    CHECK(stats.eps_stealthy);

    // Attacked alarms everywhere: not stealthy for eps < 1 - p_fa.
    std::vector<std::vector<bool>> loud(100, std::vector<bool>(10, true));
    const AlarmStats bad = evaluate_stealthiness(nominal, loud, 0.5);
    CHECK(bad.p_td == doctest::Approx(1.0));
    CHECK_FALSE(bad.eps_stealthy);

    // Permutation invariance within each group.
    std::mt19937_64 rng(9);
    std::vector<std::vector<bool>> na = nominal, aa = attacked;
    std::shuffle(na.begin(), na.end(), rng);
    std::shuffle(aa.begin(), aa.end(), rng);
    const AlarmStats again = evaluate_stealthiness(na, aa, 0.05);
    CHECK(again.p_fa == stats.p_fa);
    CHECK(again.p_td == stats.p_td);
    CHECK(again.per_step_fa == stats.per_step_fa);

    // Mismatched shapes rejected.
    std::vector<std::vector<bool>> ragged = nominal;
    ragged[0].push_back(false);
    CHECK_THROWS_AS(evaluate_stealthiness(ragged, attacked, 0.05), ConfigError);
}

TEST_CASE("effectiveness finds the first threshold crossing") {
    std::vector<Vec3> trace{Vec3{0, 1, 0}, Vec3{0, 2, 0}, Vec3{0, 3, 0},
                            Vec3{0, 2.5, 0}};
    const EffectivenessResult hit = effectiveness(trace, 3.0);
    CHECK(hit.effective);
    CHECK(hit.first_crossing == 2);

    const EffectivenessResult miss = effectiveness(trace, 3.5);
    CHECK_FALSE(miss.effective);
    CHECK_FALSE(miss.first_crossing.has_value());

    // Monotone trace: the crossing is the unique threshold step.
    std::vector<Vec3> mono;
    for (int i = 0; i < 50; ++i) mono.push_back(Vec3{0.1 * i, 0, 0});
    const EffectivenessResult m = effectiveness(mono, 2.05);
    REQUIRE(m.effective);
    CHECK(*m.first_crossing == 21);

    CHECK_THROWS_AS(effectiveness(trace, 0.0), ConfigError);
}
