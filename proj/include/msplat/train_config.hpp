#pragma once

#include <cstdint>

#include "msplat/cloud.hpp"
#include "msplat/losses.hpp"

namespace msplat {

/// Every training hyperparameter, with the working defaults. Feature and MLP
/// parameters share the 0.005 Adam rate; geometry groups keep the usual
/// splatting defaults (position decays exponentially and scales with scene
/// extent).
struct TrainConfig {
    int64_t iterations = 120000;
    uint64_t seed = 42;

    // Optimizer
    double lr_feature = 0.005;
    double lr_mlp = 0.005;
    double lr_position = 1.6e-4;        // x scene_extent, decayed to lr_position_final
    double lr_position_final = 1.6e-6;  // x scene_extent
    double lr_opacity = 0.05;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    // Warm-up: geometry frozen, only features and MLP move.
    int64_t warmup_iters = 500;

    // View sampling: every RGB image draws with this weight, others with 1.
    double rgb_sampling_weight = 4.0;
    bool deterministic_interleave = false;  // fixed 4-MS-then-RGB cycle instead

    // Densification
    int64_t densify_interval = 300;
    double tau_grad = 0.0008;
    int64_t densify_start = 500;
    int64_t densify_stop = -1;  // -1: 60% of iterations
    int64_t opacity_reset_interval = 3000;
    bool opacity_reset_enabled = true;

    // Coarse-to-fine resolution schedule.
    int64_t quarter_res_until = 250;
    int64_t half_res_until = 500;

    LossWeights weights;

    // Appearance model
    ColorModelKind color_model = ColorModelKind::neural;
    int feature_dim = 8;
    int hidden_width = 32;
    int hidden_layers = 1;
    int sh_degree = 3;

    int knn_init_k = 3;
    int knn_cos_k = 16;  // neighborhood graph for the optional cosine loss

    double background = 0.0;
    int64_t eval_interval = 0;  // 0 = only at the end

    int64_t densify_stop_effective() const {
        return densify_stop >= 0 ? densify_stop : (iterations * 6) / 10;
    }
};

}  // namespace msplat
