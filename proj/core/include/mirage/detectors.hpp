// Anomaly detectors over EKF residual streams and the stealthiness /
// effectiveness evaluators.
#pragma once

#include "mirage/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mirage {

struct DetectorVerdict {
    std::uint64_t step{0};
    bool alarm{false};
    double score{0.0};
};

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

/// CDF of the chi-square distribution with df degrees of freedom.
double chi2_cdf(double x, int df);

/// Quantile by bisection on the regularized gamma function.
double chi2_quantile(int df, double p);

/// Weighted norm of the residual: score = r^T S^-1 r, alarm when the score
/// strictly exceeds the threshold for its degrees of freedom.
double chi2_score(const VecX& residual, const MatX& innovation_cov);

class Chi2Detector {
  public:
    /// Thresholds indexed by degrees of freedom (residual dimension).
    void set_threshold(int df, double tau);
    double threshold(int df) const;
    DetectorVerdict evaluate(double score, int df, std::uint64_t step) const;

    /// Analytic thresholds at the given false-alarm probability.
    static Chi2Detector calibrated(double p_fa, const std::vector<int>& dfs);

  private:
    std::vector<std::pair<int, double>> thresholds_;
};

/// One-sided CUSUM over detector scores:
///   g <- max(0, g + score - expected - drift), alarm and reset at g > h.
class CusumDetector {
  public:
    CusumDetector(double drift, double threshold)
        : drift_(drift), threshold_(threshold) {}

    DetectorVerdict step(double score, double expected_score,
                         std::uint64_t step_index);
    void reset() { g_ = 0.0; }
    double statistic() const { return g_; }
    double threshold() const { return threshold_; }

  private:
    double drift_;
    double threshold_;
    double g_{0.0};
};

/// Aggregate and per-step alarm rates for a nominal/attacked run pair.
struct AlarmStats {
    double p_fa{0.0};
    double p_td{0.0};
    std::vector<double> per_step_fa;
    std::vector<double> per_step_td;
    bool eps_stealthy{false};
    double epsilon{0.0};
    std::size_t run_count{0};
};

/// p_FA from t >= 0 of nominal runs, p_TD from t > 0 of attacked runs; both
/// trace groups must be rectangular with equal lengths and aligned so that
/// the attack starts at index 0. The eps flag holds when the per-step rate
/// difference never exceeds epsilon.
AlarmStats evaluate_stealthiness(
    const std::vector<std::vector<bool>>& nominal_verdicts,
    const std::vector<std::vector<bool>>& attacked_verdicts, double epsilon);

struct EffectivenessResult {
    bool effective{false};
    std::optional<std::size_t> first_crossing;
};

/// Definition of alpha-effectiveness: some sample of the trace reaches
/// norm >= alpha.
EffectivenessResult effectiveness(const std::vector<Vec3>& p_cam_trace,
                                  double alpha);

}  // namespace mirage
