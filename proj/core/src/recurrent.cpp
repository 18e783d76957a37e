#include "mirage/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace mirage {

namespace {

VecX sigmoid(const VecX& v) {
    return 1.0 / (1.0 + (-v.array()).exp());
}

constexpr std::uint32_t kWeightsMagic = 0x4d52'4e31;  // "MRN1"
constexpr std::uint32_t kWeightsVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

GruModel GruModel::zeros(int input, int hidden, int output) {
    GruModel m;
    m.input_dim = input;
    m.hidden_dim = hidden;
    m.output_dim = output;
    m.w_update = MatX::Zero(hidden, input);
    m.u_update = MatX::Zero(hidden, hidden);
    m.w_reset = MatX::Zero(hidden, input);
    m.u_reset = MatX::Zero(hidden, hidden);
    m.w_cand = MatX::Zero(hidden, input);
    m.u_cand = MatX::Zero(hidden, hidden);
    m.b_update = VecX::Zero(hidden);
    m.b_reset = VecX::Zero(hidden);
    m.b_cand = VecX::Zero(hidden);
    m.w_out = MatX::Zero(output, hidden);
    m.b_out = VecX::Zero(output);
    return m;
}

GruModel GruModel::random_init(int input, int hidden, int output,
                               std::uint64_t seed) {
    GruModel m = zeros(input, hidden, output);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    const auto fill = [&](MatX& w, double scale) {
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * dist(rng);
    };
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(input));
    const double h_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill(m.w_update, in_scale);
    fill(m.u_update, h_scale);
    fill(m.w_reset, in_scale);
    fill(m.u_reset, h_scale);
    fill(m.w_cand, in_scale);
    fill(m.u_cand, h_scale);
    fill(m.w_out, h_scale);
    return m;
}

Eigen::Index GruModel::parameter_count() const {
    return 3 * (w_update.size() + u_update.size() + b_update.size()) +
           w_out.size() + b_out.size();
}

VecX GruModel::flatten() const {
    VecX theta(parameter_count());
    Eigen::Index at = 0;
    const auto put = [&](const MatX& m) {
        theta.segment(at, m.size()) =
            Eigen::Map<const VecX>(m.data(), m.size());
        at += m.size();
    };
    put(w_update); put(u_update); put(b_update);
    put(w_reset); put(u_reset); put(b_reset);
    put(w_cand); put(u_cand); put(b_cand);
    put(w_out); put(b_out);
    return theta;
}

void GruModel::unflatten(const VecX& theta) {
    if (theta.size() != parameter_count()) {
        throw ConfigError("gru unflatten: parameter count mismatch");
    }
    Eigen::Index at = 0;
    const auto take = [&](MatX& m) {
        Eigen::Map<VecX>(m.data(), m.size()) = theta.segment(at, m.size());
        at += m.size();
    };
    const auto take_v = [&](VecX& v) {
        v = theta.segment(at, v.size());
        at += v.size();
    };
    take(w_update); take(u_update); take_v(b_update);
    take(w_reset); take(u_reset); take_v(b_reset);
    take(w_cand); take(u_cand); take_v(b_cand);
    take(w_out); take_v(b_out);
}

void GruModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("gru save: cannot open " + path);
    write_le(out, kWeightsMagic);
    write_le(out, kWeightsVersion);
    write_le(out, static_cast<std::uint32_t>(input_dim));
    write_le(out, static_cast<std::uint32_t>(hidden_dim));
    write_le(out, static_cast<std::uint32_t>(output_dim));
    const VecX theta = flatten();
    write_le(out, static_cast<std::uint64_t>(theta.size()));
    out.write(reinterpret_cast<const char*>(theta.data()),
              static_cast<std::streamsize>(theta.size() * sizeof(double)));
    if (!out) throw IoError("gru save: write failed for " + path);
}

GruModel GruModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("gru load: cannot open " + path);
    if (read_le<std::uint32_t>(in) != kWeightsMagic) {
        throw IoError("gru load: bad magic in " + path);
    }
    if (read_le<std::uint32_t>(in) != kWeightsVersion) {
        throw IoError("gru load: unsupported version in " + path);
    }
    const auto input = static_cast<int>(read_le<std::uint32_t>(in));
    const auto hidden = static_cast<int>(read_le<std::uint32_t>(in));
    const auto output = static_cast<int>(read_le<std::uint32_t>(in));
    GruModel m = zeros(input, hidden, output);
    const auto count = read_le<std::uint64_t>(in);
    if (count != static_cast<std::uint64_t>(m.parameter_count())) {
        throw IoError("gru load: parameter count mismatch in " + path);
    }
    VecX theta(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(theta.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw IoError("gru load: truncated file " + path);
    m.unflatten(theta);
    return m;
}

namespace {

struct ForwardCache {
    std::vector<VecX> h, z, r, c, rh;
    std::vector<VecX> y;
};

ForwardCache forward_cached(const GruModel& m, const MatX& window) {
    const Eigen::Index steps = window.rows();
    ForwardCache cache;
    cache.h.reserve(static_cast<size_t>(steps) + 1);
    cache.h.push_back(VecX::Zero(m.hidden_dim));
    for (Eigen::Index t = 0; t < steps; ++t) {
        const VecX x = window.row(t).transpose();
        const VecX& h_prev = cache.h.back();
        const VecX z = sigmoid(m.w_update * x + m.u_update * h_prev + m.b_update);
        const VecX r = sigmoid(m.w_reset * x + m.u_reset * h_prev + m.b_reset);
        const VecX rh = r.cwiseProduct(h_prev);
        const VecX c = (m.w_cand * x + m.u_cand * rh + m.b_cand).array().tanh();
        const VecX h =
            (VecX::Ones(m.hidden_dim) - z).cwiseProduct(h_prev) +
            z.cwiseProduct(c);
        cache.z.push_back(z);
        cache.r.push_back(r);
        cache.rh.push_back(rh);
        cache.c.push_back(c);
        cache.y.push_back(m.w_out * h + m.b_out);
        cache.h.push_back(h);
    }
    return cache;
}

}  // namespace

MatX gru_forward(const GruModel& m, const MatX& window) {
    if (window.cols() != m.input_dim) {
        throw ConfigError("gru forward: input dimension mismatch");
    }
    const ForwardCache cache = forward_cached(m, window);
    MatX out(window.rows(), m.output_dim);
    for (Eigen::Index t = 0; t < window.rows(); ++t) {
        out.row(t) = cache.y[static_cast<size_t>(t)].transpose();
    }
    return out;
}

double gru_window_loss(const GruModel& m, const MatX& window) {
    const Eigen::Index steps = window.rows();
    if (steps < 2) throw ConfigError("gru loss: window length must be >= 2");
    const MatX y = gru_forward(m, window);
    double loss = 0.0;
    for (Eigen::Index t = 0; t + 1 < steps; ++t) {
        const VecX err = y.row(t).transpose() -
                         window.row(t + 1).head(m.output_dim).transpose();
        loss += 0.5 * err.squaredNorm();
    }
    return loss / static_cast<double>(steps - 1);
}

VecX gru_window_gradient(const GruModel& m, const MatX& window,
                         double* loss_out) {
    const Eigen::Index steps = window.rows();
    if (steps < 2) throw ConfigError("gru gradient: window length must be >= 2");
    const ForwardCache cache = forward_cached(m, window);
    const double norm = 1.0 / static_cast<double>(steps - 1);

    GruModel g = GruModel::zeros(m.input_dim, m.hidden_dim, m.output_dim);
    double loss = 0.0;

    VecX dh_next = VecX::Zero(m.hidden_dim);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
        const auto ti = static_cast<size_t>(t);
        const VecX x = window.row(t).transpose();
        const VecX& h_prev = cache.h[ti];
        const VecX& h = cache.h[ti + 1];
        const VecX& z = cache.z[ti];
        const VecX& r = cache.r[ti];
        const VecX& c = cache.c[ti];
        const VecX& rh = cache.rh[ti];

        VecX dh = dh_next;
        if (t + 1 < steps) {
            const VecX err = cache.y[ti] -
                             window.row(t + 1).head(m.output_dim).transpose();
            loss += 0.5 * err.squaredNorm() * norm;
            const VecX dy = err * norm;
            g.w_out += dy * h.transpose();
            g.b_out += dy;
            dh += m.w_out.transpose() * dy;
        }

        const VecX dz = dh.cwiseProduct(c - h_prev);
        const VecX dc = dh.cwiseProduct(z);
        VecX dh_prev = dh.cwiseProduct(VecX::Ones(m.hidden_dim) - z);

        const VecX dac =
            dc.cwiseProduct((VecX::Ones(m.hidden_dim) - c.cwiseProduct(c)));
        g.w_cand += dac * x.transpose();
        g.u_cand += dac * rh.transpose();
        g.b_cand += dac;
        const VecX drh = m.u_cand.transpose() * dac;
        const VecX dr = drh.cwiseProduct(h_prev);
        dh_prev += drh.cwiseProduct(r);

        const VecX daz = dz.cwiseProduct(z).cwiseProduct(VecX::Ones(m.hidden_dim) - z);
        const VecX dar = dr.cwiseProduct(r).cwiseProduct(VecX::Ones(m.hidden_dim) - r);
        g.w_update += daz * x.transpose();
        g.u_update += daz * h_prev.transpose();
        g.b_update += daz;
        g.w_reset += dar * x.transpose();
        g.u_reset += dar * h_prev.transpose();
        g.b_reset += dar;

        dh_prev += m.u_update.transpose() * daz + m.u_reset.transpose() * dar;
        dh_next = dh_prev;
    }

    if (loss_out) *loss_out = loss;
    return g.flatten();
}

double gru_score(const GruModel& m, const MatX& window) {
    const Eigen::Index steps = window.rows();
    if (steps < 2) throw ConfigError("gru score: window length must be >= 2");
    const MatX y = gru_forward(m, window);
    const VecX err = y.row(steps - 2).transpose() -
                     window.row(steps - 1).head(m.output_dim).transpose();
    return err.norm();
}

TrainResult train_recurrent(const std::vector<MatX>& nominal_traces,
                            const TrainHyperParams& hp, double p_fa) {
    if (nominal_traces.empty()) {
        throw ConfigError("train_recurrent: no traces");
    }
    if (p_fa <= 0.0 || p_fa >= 1.0) {
        throw ConfigError("train_recurrent: p_fa must be in (0, 1)");
    }
    const int input = static_cast<int>(nominal_traces.front().cols());
    for (const MatX& t : nominal_traces) {
        if (t.cols() != input) {
            throw ConfigError("train_recurrent: inconsistent trace width");
        }
    }
    const int output = input > 1 ? input - 1 : input;  // flag channel last

    // Trace-level holdout split.
    const auto holdout_count = static_cast<std::size_t>(
        std::max(1.0, std::floor(hp.holdout_fraction * nominal_traces.size())));
    std::vector<const MatX*> train_traces, holdout_traces;
    for (std::size_t i = 0; i < nominal_traces.size(); ++i) {
        if (i < nominal_traces.size() - holdout_count) {
            train_traces.push_back(&nominal_traces[i]);
        } else {
            holdout_traces.push_back(&nominal_traces[i]);
        }
    }
    if (train_traces.empty()) train_traces.push_back(holdout_traces.front());

    // Collect training windows.
    std::vector<std::pair<const MatX*, Eigen::Index>> windows;
    for (const MatX* trace : train_traces) {
        for (Eigen::Index start = 0; start + hp.window <= trace->rows();
             start += hp.stride) {
            windows.emplace_back(trace, start);
        }
    }
    if (windows.empty()) {
        throw ConfigError("train_recurrent: traces shorter than the window");
    }

    GruModel model = GruModel::random_init(input, hp.hidden, output, hp.seed);
    VecX theta = model.flatten();
    VecX adam_m = VecX::Zero(theta.size());
    VecX adam_v = VecX::Zero(theta.size());
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::mt19937_64 shuffle_rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);

    double last_loss = 0.0;
    long adam_t = 0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(windows.begin(), windows.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < windows.size();
             at += static_cast<std::size_t>(hp.batch)) {
            const std::size_t end = std::min(
                windows.size(), at + static_cast<std::size_t>(hp.batch));
            VecX grad = VecX::Zero(theta.size());
            double batch_loss = 0.0;
            model.unflatten(theta);
            for (std::size_t i = at; i < end; ++i) {
                double loss = 0.0;
                grad += gru_window_gradient(
                    model,
                    windows[i].first->middleRows(windows[i].second, hp.window),
                    &loss);
                batch_loss += loss;
            }
            const double inv = 1.0 / static_cast<double>(end - at);
            grad *= inv;
            batch_loss *= inv;
            if (!std::isfinite(batch_loss)) {
                throw SimulationError("train_recurrent: loss diverged");
            }
            epoch_loss += batch_loss;
            ++batches;

            ++adam_t;
            adam_m = beta1 * adam_m + (1.0 - beta1) * grad;
            adam_v = beta2 * adam_v.array() +
                     (1.0 - beta2) * grad.array().square();
            const double mc = 1.0 - std::pow(beta1, adam_t);
            const double vc = 1.0 - std::pow(beta2, adam_t);
            theta.array() -= hp.learning_rate * (adam_m.array() / mc) /
                             ((adam_v.array() / vc).sqrt() + adam_eps);
        }
        last_loss = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
    }
    model.unflatten(theta);

    // Held-out scores with the runtime window, stride 1.
    std::vector<double> scores;
    for (const MatX* trace : holdout_traces) {
        for (Eigen::Index end = hp.window; end <= trace->rows(); ++end) {
            scores.push_back(
                gru_score(model, trace->middleRows(end - hp.window, hp.window)));
        }
    }
    if (scores.empty()) {
        throw ConfigError("train_recurrent: holdout produced no scores");
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::min<double>(sorted.size() - 1.0,
                         std::ceil((1.0 - p_fa) * sorted.size())));
    const double threshold = sorted[idx];

    std::size_t alarms = 0;
    for (double s : scores) alarms += s > threshold ? 1 : 0;

    TrainResult result;
    result.model = std::move(model);
    result.threshold = threshold;
    result.final_loss = last_loss;
    result.holdout_alarm_rate =
        static_cast<double>(alarms) / static_cast<double>(scores.size());
    result.train_windows = windows.size();
    result.holdout_scores = scores.size();
    return result;
}

std::pair<double, bool> RecurrentScorer::push(const VecX& input) {
    buffer_.push_back(input);
    if (buffer_.size() > static_cast<std::size_t>(window_)) {
        buffer_.erase(buffer_.begin());
    }
    if (buffer_.size() < 2) return {0.0, false};
    MatX window(static_cast<Eigen::Index>(buffer_.size()), input.size());
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
        window.row(static_cast<Eigen::Index>(i)) = buffer_[i].transpose();
    }
    const double s = gru_score(model_, window);
    return {s, s > threshold_};
}

}  // namespace mirage
