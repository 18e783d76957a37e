#include "mirage/sensing.hpp"

namespace mirage {

Measurement measure(const State12& x, const MeasurementModel& model,
                    const VecX& channel_stds, GaussianRng& rng,
                    std::uint64_t step) {
    if (channel_stds.size() != model.dim) {
        throw ConfigError("measure: noise stds do not match model dimension");
    }
    Measurement m;
    m.values = model(x) + rng.sample_vec(channel_stds);
    m.step = step;
    return m;
}

}  // namespace mirage
