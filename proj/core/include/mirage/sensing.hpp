// Physical sensor channel y_t = h(x_t) + v_t (GPS position/velocity, IMU
// attitude, gyro rates).
#pragma once

#include "mirage/types.hpp"

#include <cstdint>
#include <functional>
#include <random>

namespace mirage {

/// One sensor sample, timestamped with the step index.
struct Measurement {
    VecX values;
    std::uint64_t step{0};
};

/// Per-channel standard deviations of the measurement noise.
struct SensorNoiseParams {
    double pos_std{0.05};    // m
    double vel_std{0.05};    // m/s
    double att_std{0.005};   // rad
    double rate_std{0.005};  // rad/s

    /// Expanded to the 12 channels of the default measurement model.
    VecX channel_stds() const {
        VecX s(kStateDim);
        s.segment<3>(kIdxPos).setConstant(pos_std);
        s.segment<3>(kIdxVel).setConstant(vel_std);
        s.segment<3>(kIdxAtt).setConstant(att_std);
        s.segment<3>(kIdxRate).setConstant(rate_std);
        return s;
    }
};

/// Pluggable measurement model; the attack formulas only assume a function
/// of the state, never linearity.
struct MeasurementModel {
    std::function<VecX(const State12&)> h;
    int dim{kStateDim};

    VecX operator()(const State12& x) const { return h(x); }

    /// Default model: identity selection of all 12 state components.
    static MeasurementModel identity() {
        return MeasurementModel{
            [](const State12& x) { return VecX(x.to_vector()); }, kStateDim};
    }
};

/// Deterministic Gaussian stream; each simulation owns its streams.
class GaussianRng {
  public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    double sample(double std_dev) { return std_dev * normal_(engine_); }

    VecX sample_vec(const VecX& stds) {
        VecX v(stds.size());
        for (Eigen::Index i = 0; i < stds.size(); ++i) v[i] = sample(stds[i]);
        return v;
    }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// h(x) plus independent per-channel Gaussian noise; stds must match the
/// model dimension.
Measurement measure(const State12& x, const MeasurementModel& model,
                    const VecX& channel_stds, GaussianRng& rng,
                    std::uint64_t step);

inline Measurement measure(const State12& x, const MeasurementModel& model,
                           const SensorNoiseParams& noise, GaussianRng& rng,
                           std::uint64_t step) {
    return measure(x, model, noise.channel_stds(), rng, step);
}

}  // namespace mirage
