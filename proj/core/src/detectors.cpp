#include "mirage/detectors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mirage {

namespace {

// Lanczos approximation of log Gamma.
double log_gamma(double x) {
    static const double coeffs[6] = {76.18009172947146,   -86.50532032941677,
                                     24.01409824083091,   -1.231739572450155,
                                     0.1208650973866179e-2, -0.5395239384953e-5};
    double y = x;
    double tmp = x + 5.5;
    tmp -= (x + 0.5) * std::log(tmp);
    double ser = 1.000000000190015;
    for (double c : coeffs) ser += c / ++y;
    return -tmp + std::log(2.5066282746310005 * ser / x);
}

// Series representation, converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Continued fraction for Q(a, x), better for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) {
        throw ConfigError("regularized_gamma_p: domain error");
    }
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_cdf(double x, int df) {
    if (df <= 0) throw ConfigError("chi2_cdf: df must be positive");
    if (x <= 0.0) return 0.0;
    return regularized_gamma_p(df / 2.0, x / 2.0);
}

double chi2_quantile(int df, double p) {
    if (p <= 0.0 || p >= 1.0) {
        throw ConfigError("chi2_quantile: p must be in (0, 1)");
    }
    double lo = 0.0;
    double hi = df + 10.0;
    while (chi2_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

double chi2_score(const VecX& residual, const MatX& innovation_cov) {
    Eigen::LDLT<MatX> solver(innovation_cov);
    if (solver.info() != Eigen::Success || !solver.isPositive()) {
        throw SimulationError("chi2_score: covariance not positive definite");
    }
    return residual.dot(solver.solve(residual));
}

void Chi2Detector::set_threshold(int df, double tau) {
    for (auto& [d, t] : thresholds_) {
        if (d == df) {
            t = tau;
            return;
        }
    }
    thresholds_.emplace_back(df, tau);
}

double Chi2Detector::threshold(int df) const {
    for (const auto& [d, t] : thresholds_) {
        if (d == df) return t;
    }
    throw ConfigError("chi2 detector: no threshold for df " +
                      std::to_string(df));
}

DetectorVerdict Chi2Detector::evaluate(double score, int df,
                                       std::uint64_t step) const {
    DetectorVerdict v;
    v.step = step;
    v.score = score;
    v.alarm = score > threshold(df);
    return v;
}

Chi2Detector Chi2Detector::calibrated(double p_fa, const std::vector<int>& dfs) {
    Chi2Detector d;
    for (int df : dfs) d.set_threshold(df, chi2_quantile(df, 1.0 - p_fa));
    return d;
}

DetectorVerdict CusumDetector::step(double score, double expected_score,
                                    std::uint64_t step_index) {
    if (drift_ <= 0.0) throw ConfigError("cusum: drift must be positive");
    g_ = std::max(0.0, g_ + score - expected_score - drift_);
    DetectorVerdict v;
    v.step = step_index;
    v.score = g_;
    v.alarm = g_ > threshold_;
    if (v.alarm) g_ = 0.0;
    return v;
}

AlarmStats evaluate_stealthiness(
    const std::vector<std::vector<bool>>& nominal_verdicts,
    const std::vector<std::vector<bool>>& attacked_verdicts, double epsilon) {
    if (nominal_verdicts.empty() || attacked_verdicts.empty()) {
        throw ConfigError("evaluate_stealthiness: empty trace group");
    }
    const std::size_t len = nominal_verdicts.front().size();
    for (const auto& t : nominal_verdicts) {
        if (t.size() != len) {
            throw ConfigError("evaluate_stealthiness: ragged nominal traces");
        }
    }
    for (const auto& t : attacked_verdicts) {
        if (t.size() != len) {
            throw ConfigError("evaluate_stealthiness: trace length mismatch");
        }
    }

    AlarmStats stats;
    stats.epsilon = epsilon;
    stats.run_count = attacked_verdicts.size();
    stats.per_step_fa.resize(len, 0.0);
    stats.per_step_td.resize(len, 0.0);

    std::size_t fa_hits = 0, fa_total = 0, td_hits = 0, td_total = 0;
    for (std::size_t t = 0; t < len; ++t) {
        std::size_t nf = 0;
        for (const auto& run : nominal_verdicts) nf += run[t] ? 1 : 0;
        stats.per_step_fa[t] = static_cast<double>(nf) / nominal_verdicts.size();
        fa_hits += nf;
        fa_total += nominal_verdicts.size();

        std::size_t na = 0;
        for (const auto& run : attacked_verdicts) na += run[t] ? 1 : 0;
        stats.per_step_td[t] =
            static_cast<double>(na) / attacked_verdicts.size();
        if (t > 0) {  // p_TD counts t > 0 only; the attack starts at t = 0.
            td_hits += na;
            td_total += attacked_verdicts.size();
        }
    }
    stats.p_fa = fa_total ? static_cast<double>(fa_hits) / fa_total : 0.0;
    stats.p_td = td_total ? static_cast<double>(td_hits) / td_total : 0.0;

    stats.eps_stealthy = true;
    for (std::size_t t = 0; t < len; ++t) {
        if (stats.per_step_td[t] - stats.per_step_fa[t] > epsilon) {
            stats.eps_stealthy = false;
            break;
        }
    }
    return stats;
}

EffectivenessResult effectiveness(const std::vector<Vec3>& p_cam_trace,
                                  double alpha) {
    if (alpha <= 0.0) throw ConfigError("effectiveness: alpha must be > 0");
    EffectivenessResult r;
    for (std::size_t i = 0; i < p_cam_trace.size(); ++i) {
        if (p_cam_trace[i].norm() >= alpha) {
            r.effective = true;
            r.first_crossing = i;
            break;
        }
    }
    return r;
}

}  // namespace mirage
