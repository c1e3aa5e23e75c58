#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "msplat/adam.hpp"
#include "msplat/camera.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"
#include "msplat/densify.hpp"
#include "msplat/io/checkpoint.hpp"
#include "msplat/io/dataset.hpp"
#include "msplat/losses.hpp"
#include "msplat/metrics.hpp"
#include "msplat/render.hpp"
#include "msplat/train_config.hpp"

namespace msplat {

/// Weighted view draw: every image of an RGB band carries rgb_weight, every
/// other image weight 1.
inline size_t sample_view(Rng& rng, const std::vector<CameraView>& views,
                          const SpectralBandSet& bands, double rgb_weight) {
    require(!views.empty(), ErrorClass::shape_mismatch, "no views to sample from");
    std::vector<double> weights(views.size());
    for (size_t i = 0; i < views.size(); ++i)
        weights[i] = bands[views[i].band_index].is_rgb() ? rgb_weight : 1.0;
    return rng.pick_weighted(weights);
}

struct StepReport {
    double loss = 0.0;
    int band_index = 0;
    size_t primitive_count = 0;
};

/// Single-writer training loop: one step mutates the scene at a time; within
/// a step, rendering and its backward may parallelize.
class Trainer {
public:
    Trainer(const Dataset& dataset, const TrainConfig& config)
        : config_(config), bands_(dataset.bands), dataset_(&dataset), rng_(config.seed) {
        require(!dataset.views.empty() && dataset.images.size() == dataset.views.size(),
                ErrorClass::shape_mismatch, "dataset must carry loaded images");
        split_ = split_train_eval(dataset.views);

        std::vector<Vec3> centers;
        for (size_t i : split_.train) centers.push_back(dataset.views[i].camera_center());
        scene_extent_ = scene_extent_of(centers);

        cloud_ = init_from_points(dataset.points, config.feature_dim, config.knn_init_k,
                                  config.seed);
        model_.kind = config.color_model;
        if (config.color_model == ColorModelKind::neural) {
            model_.decoder = init_decoder(config.feature_dim, config.hidden_width,
                                          config.hidden_layers, bands_.total_channels(),
                                          config.seed + 1);
            decoder_w_opt_.resize(model_.decoder.layers.size());
            decoder_b_opt_.resize(model_.decoder.layers.size());
        } else {
            model_.sh =
                SHColorModel::zeros(cloud_.count(), config.sh_degree, bands_.total_channels());
        }
        densify_state_.reset(cloud_.count(), bands_.size());
        adam_cfg_ = {config.adam_beta1, config.adam_beta2, config.adam_eps};
        if (config.weights.lambda_cos > 0.0) rebuild_feature_knn();
    }

    const GaussianCloud& cloud() const { return cloud_; }
    const ColorModel& model() const { return model_; }
    const DensifyState& densify_state() const { return densify_state_; }
    const CloudOptimizers& optimizers() const { return opt_; }
    const TrainEvalSplit& split() const { return split_; }
    double scene_extent() const { return scene_extent_; }

    /// Resolution factor of the coarse-to-fine schedule at an iteration.
    int resolution_divisor(int64_t iter) const {
        int div = 1;
        if (iter < config_.quarter_res_until)
            div = 4;
        else if (iter < config_.half_res_until)
            div = 2;
        const CameraView& v = dataset_->views[0];
        while (div > 1 && (v.width / div < 16 || v.height / div < 16)) div /= 2;
        return div;
    }

    /// Renders the view's band at the scheduled resolution, evaluates the
    /// loss, backpropagates through compositor, projection and decoder, and
    /// applies the Adam updates. During warm-up (iter < warmup_iters) the
    /// geometry arrays are left bit-identical; only features and the color
    /// model move. Homodirectional gradients are folded into the per-band
    /// densification accumulator.
    StepReport train_step(size_t view_index, int64_t iter) {
        const CameraView& full_view = dataset_->views[view_index];
        const Image& full_gt = dataset_->images[view_index];
        int band = full_view.band_index;
        int cc = bands_[band].channel_count;

        int div = resolution_divisor(iter);
        CameraView view = div > 1 ? full_view.scaled(1.0 / div) : full_view;
        Image gt = div > 1 ? downsample_area(full_gt, div) : full_gt;

        std::vector<double> bg(static_cast<size_t>(cc), config_.background);
        RenderBundle bundle = render_view(cloud_, model_, bands_, band, view, bg);

        TotalLoss loss = total_loss(bundle.image, gt, cloud_.features, cloud_.feature_dim,
                                    config_.weights,
                                    feature_knn_.empty() ? nullptr : &feature_knn_,
                                    config_.knn_cos_k);

        RasterBackwardResult raster = rasterize_backward(
            bundle.projected, bundle.colors, bundle.opacities, view, bg, bundle.aux, loss.d_image);

        accumulate_view_gradients(densify_state_, band, raster.homodir, bundle.aux.participated);

        size_t s = cloud_.count();
        std::vector<double>& d_features = loss.d_features;  // starts with reg/cos terms

        if (model_.kind == ColorModelKind::neural) {
            size_t rows = bundle.visible_rows.size();
            int out_dim = model_.decoder.output_dim;
            int off = bands_.channel_offset(band);
            std::vector<double> d_full(rows * static_cast<size_t>(out_dim), 0.0);
            for (size_t r = 0; r < rows; ++r) {
                size_t i = static_cast<size_t>(bundle.visible_rows[r]);
                for (int c = 0; c < cc; ++c)
                    d_full[r * static_cast<size_t>(out_dim) + off + c] =
                        raster.d_color[i * static_cast<size_t>(cc) + c];
            }
            DecoderGrads dgrads;
            std::vector<double> d_rows =
                decode_backward(model_.decoder, bundle.cache, d_full, dgrads);
            int d = cloud_.feature_dim;
            for (size_t r = 0; r < rows; ++r) {
                size_t i = static_cast<size_t>(bundle.visible_rows[r]);
                for (int k = 0; k < d; ++k)
                    d_features[i * static_cast<size_t>(d) + k] +=
                        d_rows[r * static_cast<size_t>(d) + k];
            }
            for (size_t l = 0; l < model_.decoder.layers.size(); ++l) {
                adam_step(model_.decoder.layers[l].weights, dgrads.layers[l].weights,
                          decoder_w_opt_[l], config_.lr_mlp, adam_cfg_);
                adam_step(model_.decoder.layers[l].biases, dgrads.layers[l].biases,
                          decoder_b_opt_[l], config_.lr_mlp, adam_cfg_);
            }
        } else {
            // Scatter the band-slice gradient back onto the visible rows'
            // coefficients.
            size_t rows = bundle.visible_rows.size();
            std::vector<double> vals(rows * static_cast<size_t>(cc));
            for (size_t r = 0; r < rows; ++r) {
                size_t i = static_cast<size_t>(bundle.visible_rows[r]);
                for (int c = 0; c < cc; ++c)
                    vals[r * static_cast<size_t>(cc) + c] = bundle.colors[i * cc + c];
            }
            std::vector<double> d_vals(rows * static_cast<size_t>(cc));
            for (size_t r = 0; r < rows; ++r) {
                size_t i = static_cast<size_t>(bundle.visible_rows[r]);
                for (int c = 0; c < cc; ++c)
                    d_vals[r * static_cast<size_t>(cc) + c] =
                        raster.d_color[i * static_cast<size_t>(cc) + c];
            }
            SHColorModel sub;
            sub.degree = model_.sh.degree;
            sub.total_channels = model_.sh.total_channels;
            size_t fpp = model_.sh.floats_per_primitive();
            sub.coeffs.resize(rows * fpp);
            std::vector<double> d_sub(rows * fpp, 0.0);
            sh_backward(sub, bundle.direction_vectors, bands_, band, vals, d_vals, d_sub);
            std::vector<double> d_coeffs(model_.sh.coeffs.size(), 0.0);
            for (size_t r = 0; r < rows; ++r) {
                size_t i = static_cast<size_t>(bundle.visible_rows[r]);
                for (size_t k = 0; k < fpp; ++k) d_coeffs[i * fpp + k] = d_sub[r * fpp + k];
            }
            adam_step(model_.sh.coeffs, d_coeffs, sh_opt_, config_.lr_feature, adam_cfg_);
        }

        adam_step(cloud_.features, d_features, opt_.feature, config_.lr_feature, adam_cfg_);

        if (iter >= config_.warmup_iters) {
            ProjectionGrads proj = project_backward(cloud_, view, bundle.projected,
                                                    raster.d_mean2d, raster.d_conic);
            std::vector<double> d_logits(s, 0.0);
            for (size_t i = 0; i < s; ++i) {
                double o = bundle.opacities[i];
                d_logits[i] = raster.d_opacity[i] * o * (1.0 - o);
            }
            double lr_pos = exp_lr_schedule(config_.lr_position, config_.lr_position_final, iter,
                                            config_.iterations) *
                            scene_extent_;
            adam_step(cloud_.positions, proj.d_position, opt_.position, lr_pos, adam_cfg_);
            adam_step(cloud_.rotations, proj.d_rotation, opt_.rotation, config_.lr_rotation,
                      adam_cfg_);
            adam_step(cloud_.log_scales, proj.d_log_scale, opt_.log_scale, config_.lr_scale,
                      adam_cfg_);
            adam_step(cloud_.opacity_logits, d_logits, opt_.opacity, config_.lr_opacity,
                      adam_cfg_);
        }

        return {loss.value, band, cloud_.count()};
    }

    /// Densify + prune bookkeeping at the end of a densification interval.
    void densify_and_prune() {
        std::vector<ExtraRowArray> extras;
        if (model_.kind == ColorModelKind::per_band_sh)
            extras.push_back({&model_.sh.coeffs, &sh_opt_,
                              static_cast<int>(model_.sh.floats_per_primitive())});
        std::vector<uint8_t> mask = densification_mask(densify_state_, config_.tau_grad);
        apply_densification(cloud_, opt_, densify_state_, mask, scene_extent_, rng_, extras);
        prune_primitives(cloud_, opt_, densify_state_, scene_extent_, kPruneOpacityFloor, extras);
        if (config_.weights.lambda_cos > 0.0) rebuild_feature_knn();
    }

    void reset_opacity() {
        for (size_t i = 0; i < cloud_.count(); ++i) {
            double o = std::min(cloud_.opacity(i), 0.01);
            cloud_.opacity_logits[i] = logit(o);
        }
        opt_.opacity = AdamState{};
    }

    /// Full run: warm-up, main loop with densification in its window and
    /// periodic opacity resets, then the final checkpoint.
    Checkpoint train(std::ostream* log = nullptr) {
        int64_t stop = config_.densify_stop_effective();
        for (int64_t iter = 0; iter < config_.iterations; ++iter) {
            size_t view_index = next_view(iter);
            StepReport report = train_step(view_index, iter);
            if (log)
                (*log) << "iter=" << iter << " band=" << bands_[report.band_index].name
                       << " loss=" << report.loss << " primitives=" << report.primitive_count
                       << "\n";

            bool in_window = iter >= config_.densify_start && iter < stop;
            if (in_window && (iter + 1) % config_.densify_interval == 0) densify_and_prune();
            if (in_window && config_.opacity_reset_enabled &&
                (iter + 1) % config_.opacity_reset_interval == 0)
                reset_opacity();
            if (log && config_.eval_interval > 0 && (iter + 1) % config_.eval_interval == 0)
                log_eval(*log, iter + 1);
        }
        if (log) log_eval(*log, config_.iterations);
        return checkpoint();
    }

    Checkpoint checkpoint() const {
        Checkpoint ckpt;
        ckpt.bands = bands_;
        ckpt.cloud = cloud_;
        ckpt.color_model = model_.kind;
        ckpt.decoder = model_.decoder;
        ckpt.sh = model_.sh;
        ckpt.iteration = config_.iterations;
        ckpt.config = config_;
        return ckpt;
    }

    EvalReport evaluate_holdout() const {
        std::vector<CameraView> views;
        std::vector<Image> images;
        for (size_t i : split_.eval) {
            views.push_back(dataset_->views[i]);
            images.push_back(dataset_->images[i]);
        }
        return evaluate(cloud_, model_, bands_, views, images, config_.background);
    }

    size_t next_view(int64_t iter) {
        const auto& views = dataset_->views;
        if (!config_.deterministic_interleave)
            return pick_from(split_.train, sample_weights(), rng_);
        // Fixed cycle: four multi-spectral draws, then an RGB one.
        std::vector<size_t> rgb, ms;
        for (size_t i : split_.train)
            (bands_[views[i].band_index].is_rgb() ? rgb : ms).push_back(i);
        if (rgb.empty()) return ms[static_cast<size_t>(iter) % ms.size()];
        if (ms.empty()) return rgb[static_cast<size_t>(iter) % rgb.size()];
        if (iter % 5 == 4) return rgb[static_cast<size_t>(iter / 5) % rgb.size()];
        int64_t k = iter - iter / 5;
        return ms[static_cast<size_t>(k) % ms.size()];
    }

private:
    std::vector<double> sample_weights() const {
        std::vector<double> w(split_.train.size());
        for (size_t k = 0; k < split_.train.size(); ++k)
            w[k] = bands_[dataset_->views[split_.train[k]].band_index].is_rgb()
                       ? config_.rgb_sampling_weight
                       : 1.0;
        return w;
    }
    static size_t pick_from(const std::vector<size_t>& pool, const std::vector<double>& weights,
                            Rng& rng) {
        return pool[rng.pick_weighted(weights)];
    }

    void rebuild_feature_knn() {
        std::vector<Vec3> pos(cloud_.count());
        for (size_t i = 0; i < cloud_.count(); ++i) pos[i] = cloud_.position(i);
        if (pos.size() > static_cast<size_t>(config_.knn_cos_k))
            feature_knn_ = knn_indices(pos, config_.knn_cos_k);
        else
            feature_knn_.clear();
    }

    void log_eval(std::ostream& log, int64_t iter) const {
        EvalReport report = evaluate_holdout();
        for (const auto& b : report.per_band)
            log << "eval iter=" << iter << " band=" << b.band << " psnr=" << b.psnr
                << " ssim=" << b.ssim << "\n";
        log << "eval iter=" << iter << " sam=" << report.sam_mean << " scm=" << report.scm_mean
            << " sid=" << report.sid_mean << " primitives=" << cloud_.count() << "\n";
    }

    TrainConfig config_;
    SpectralBandSet bands_;
    const Dataset* dataset_;
    TrainEvalSplit split_;
    GaussianCloud cloud_;
    ColorModel model_;
    CloudOptimizers opt_;
    std::vector<AdamState> decoder_w_opt_, decoder_b_opt_;
    AdamState sh_opt_;
    DensifyState densify_state_;
    std::vector<int> feature_knn_;
    Rng rng_;
    double scene_extent_ = 1.0;
    AdamConfig adam_cfg_;
};

}  // namespace msplat
