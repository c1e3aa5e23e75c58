#pragma once

#include <cmath>
#include <vector>

#include "msplat/common.hpp"

namespace msplat {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// First/second moment state for one parameter group. Shapes track the
/// parameter array across densification; moments of newly created rows are
/// zero while the group step counter carries on.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t step = 0;

    void ensure_size(size_t n) {
        if (m.size() != n) m.assign(n, 0.0);
        if (v.size() != n) v.assign(n, 0.0);
    }
};

/// Bias-corrected Adam update, in place.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, double lr, const AdamConfig& cfg = {}) {
    require(params.size() == grads.size(), ErrorClass::shape_mismatch,
            "parameter/gradient size mismatch");
    state.ensure_size(params.size());
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

/// Exponential learning-rate interpolation from lr_init to lr_final over
/// max_steps.
inline double exp_lr_schedule(double lr_init, double lr_final, int64_t step, int64_t max_steps) {
    if (max_steps <= 0) return lr_init;
    double t = std::clamp(static_cast<double>(step) / static_cast<double>(max_steps), 0.0, 1.0);
    return std::exp(std::log(lr_init) * (1.0 - t) + std::log(lr_final) * t);
}

}  // namespace msplat
