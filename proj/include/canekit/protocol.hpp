#pragma once

// Training-protocol arithmetic as pure functions: cosine annealing,
// patience-based early stopping, label-smoothed cross-entropy and
// gradient-clip scaling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <utility>

#include "canekit/errors.hpp"

namespace canekit::hpo {

struct ProtocolConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t trial_epochs = 25;
    std::size_t trials = 20;
    std::size_t patience = 10;

    void validate() const {
        if (patience < 1) throw ConfigError("patience must be at least 1");
        if (max_epochs < 1 || trial_epochs < 1) throw ConfigError("epoch counts must be at least 1");
        if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    }
};

/// Tuned values reported for the shuffle backbone.
struct TunedHyperparameters {
    double lr = 6.17e-4;
    const char* optimizer = "Adam";
    double weight_decay = 1.27e-4;
    double dropout1 = 0.480;
    double dropout2 = 0.492;
    double freeze_ratio = 0.453;
    double label_smoothing = 0.052;
    double grad_clip = 1.702;
};

/// eta_min + (eta_max - eta_min) * (1 + cos(pi t / T)) / 2.
inline double cosine_lr(double t, double T, double eta_max, double eta_min = 0.0) {
    if (!(T >= 1.0)) throw ArgumentError("cosine_lr needs T >= 1");
    if (!(t >= 0.0 && t <= T)) throw ArgumentError("cosine_lr epoch outside [0, T]");
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + std::cos(std::numbers::pi * t / T));
}

inline constexpr double kImprovementTolerance = 1e-8;

struct EarlyStopState {
    std::size_t patience = 10;
    double best = std::numeric_limits<double>::infinity();
    std::size_t bad_epochs = 0;
    std::size_t epoch = 0;
    bool stopped = false;
};

/// Feeds one epoch's validation loss. Returns the new state and whether
/// training should stop now.
inline std::pair<EarlyStopState, bool> early_stop_step(EarlyStopState s, double loss) {
    if (s.patience < 1) throw ConfigError("patience must be at least 1");
    ++s.epoch;
    if (loss < s.best - kImprovementTolerance) {
        s.best = loss;
        s.bad_epochs = 0;
    } else {
        ++s.bad_epochs;
    }
    s.stopped = s.bad_epochs >= s.patience;
    return {s, s.stopped};
}

/// Mutable convenience wrapper around early_stop_step.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience = 10) { state_.patience = patience; }
    bool step(double loss) {
        bool stop = false;
        std::tie(state_, stop) = early_stop_step(state_, loss);
        return stop;
    }
    const EarlyStopState& state() const noexcept { return state_; }

private:
    EarlyStopState state_;
};

/// Cross-entropy against (1 - eps) * onehot(c) + eps / K.
inline double label_smooth_ce(std::span<const double> logits, std::size_t target, double epsilon) {
    const std::size_t k = logits.size();
    if (k == 0) throw ArgumentError("label_smooth_ce needs at least one logit");
    if (target >= k) throw ArgumentError("target class " + std::to_string(target) + " out of range");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ArgumentError("label smoothing must lie in [0, 1)");
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    const double log_z = m + std::log(sum);
    const double uniform = epsilon / static_cast<double>(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double t = (i == target ? 1.0 - epsilon : 0.0) + uniform;
        loss -= t * (logits[i] - log_z);
    }
    return loss;
}

/// Factor applied to gradients whose global norm is g under max norm m.
inline double clip_scale(double g, double m) {
    if (!(m > 0.0)) throw ArgumentError("max norm must be positive");
    if (!(g >= 0.0)) throw ArgumentError("gradient norm must be non-negative");
    if (g == 0.0) return 1.0;
    return std::min(1.0, m / g);
}

}  // namespace canekit::hpo
