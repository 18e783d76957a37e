// Learned anomaly detector: a single gated recurrent cell trained to predict
// the next normalized residual vector; the prediction error norm is the
// anomaly score.
#pragma once

#include "mirage/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mirage {

/// GRU cell plus linear readout. Inputs are whitened residual vectors (plus
/// a visibility flag channel); the readout predicts the next input's first
/// `output_dim` channels.
struct GruModel {
    int input_dim{0};
    int hidden_dim{0};
    int output_dim{0};

    MatX w_update, u_update;  // z gate
    MatX w_reset, u_reset;    // r gate
    MatX w_cand, u_cand;      // candidate state
    VecX b_update, b_reset, b_cand;
    MatX w_out;
    VecX b_out;

    static GruModel zeros(int input, int hidden, int output);
    /// Scaled Gaussian initialization, deterministic for a given seed.
    static GruModel random_init(int input, int hidden, int output,
                                std::uint64_t seed);

    Eigen::Index parameter_count() const;
    VecX flatten() const;
    void unflatten(const VecX& theta);

    /// Flat little-endian float64 parameter vector with a versioned header.
    void save(const std::string& path) const;
    static GruModel load(const std::string& path);
};

/// Forward pass over a window (rows = steps, cols = input_dim). Returns the
/// per-step predictions (rows = steps, cols = output_dim).
MatX gru_forward(const GruModel& m, const MatX& window);

/// Mean squared one-step-ahead prediction loss over the window:
///   L = 1/(T-1) * sum_t 0.5 || y_t - x_{t+1}[0:out] ||^2.
double gru_window_loss(const GruModel& m, const MatX& window);

/// Analytic gradient of gru_window_loss via backpropagation through time.
/// Returns the flattened gradient; `loss_out` receives the loss value.
VecX gru_window_gradient(const GruModel& m, const MatX& window,
                         double* loss_out = nullptr);

/// Anomaly score for a window: prediction error norm at the last step.
/// Requires window length >= 2.
double gru_score(const GruModel& m, const MatX& window);

struct TrainHyperParams {
    int window{20};
    int stride{5};
    int epochs{4};
    int batch{32};
    double learning_rate{3e-3};
    double holdout_fraction{0.25};
    std::uint64_t seed{7};
    int hidden{32};
};

struct TrainResult {
    GruModel model;
    double threshold{0.0};       // (1 - p_fa) quantile of held-out scores
    double final_loss{0.0};
    double holdout_alarm_rate{0.0};
    std::size_t train_windows{0};
    std::size_t holdout_scores{0};
};

/// Trains by Adam on truncated windows of the nominal traces and sets the
/// score threshold from the held-out quantile. Throws SimulationError when
/// the loss diverges.
TrainResult train_recurrent(const std::vector<MatX>& nominal_traces,
                            const TrainHyperParams& hp, double p_fa);

/// Rolling window scorer for closed-loop use.
class RecurrentScorer {
  public:
    RecurrentScorer(GruModel model, double threshold, int window)
        : model_(std::move(model)), threshold_(threshold), window_(window) {}

    /// Pushes one input vector; returns the score once the buffer holds at
    /// least two samples (0 before that, no alarm).
    std::pair<double, bool> push(const VecX& input);
    double threshold() const { return threshold_; }
    const GruModel& model() const { return model_; }

  private:
    GruModel model_;
    double threshold_;
    int window_;
    std::vector<VecX> buffer_;
};

}  // namespace mirage
