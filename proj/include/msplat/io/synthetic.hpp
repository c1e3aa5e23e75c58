#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msplat/bands.hpp"
#include "msplat/common.hpp"
#include "msplat/io/checkpoint.hpp"
#include "msplat/io/colmap.hpp"
#include "msplat/io/image_io.hpp"
#include "msplat/io/manifest.hpp"
#include "msplat/render.hpp"

namespace msplat {

struct SynthConfig {
    uint64_t seed = 1;
    int n_gaussians = 100;
    int views_per_band = 16;
    SpectralBandSet band_set = default_band_set();
    int image_size = 64;
    // How strongly the high-frequency half of the material latents couples
    // into the visible channels vs. the NIR-like channels. Lowering the RGB
    // coupling produces scenes whose detail lives only in NIR.
    double rgb_detail_coupling = 0.15;
    double nir_detail_coupling = 1.0;
};

namespace synth_detail {

/// Structured ground-truth decoder over d = 8 material latents: the low half
/// feeds every band, the high half feeds mostly the longer-wavelength bands.
/// Built as a single ELU block (no hidden-to-hidden layer) so the band
/// intensities stay smooth functions of the latents. Output rows are
/// normalized for equal contrast and recentered over the scene's latents so
/// every band spans a comparable intensity range.
inline ColorDecoder build_gt_decoder(const SpectralBandSet& bands, const SynthConfig& cfg,
                                     const std::vector<double>& features, Rng& rng) {
    int d = 8, width = 32;
    int total = bands.total_channels();
    ColorDecoder dec = init_decoder(d, width, 0, total, cfg.seed ^ 0x9e3779b97f4a7c15ull);

    int half = width / 2;
    int low_dims = d / 2;
    // Input block: first half of the hidden units mixes the low latents (and
    // a little view direction), second half mixes the high latents.
    DenseLayer& l0 = dec.layers[0];
    for (int h = 0; h < width; ++h) {
        for (int k = 0; k < d + 2; ++k) {
            double w = 0.0;
            bool low_unit = h < half;
            if (k < low_dims)
                w = low_unit ? rng.normal(0.0, 1.0) : 0.0;
            else if (k < d)
                w = low_unit ? 0.0 : rng.normal(0.0, 1.0);
            else
                w = low_unit ? rng.normal(0.0, 0.15) : 0.0;  // mild view dependence
            l0.weights[static_cast<size_t>(h) * (d + 2) + k] = w;
        }
        l0.biases[static_cast<size_t>(h)] = rng.normal(0.0, 0.1);
    }

    DenseLayer& l1 = dec.layers[1];
    for (int b = 0; b < bands.size(); ++b) {
        int off = bands.channel_offset(b);
        bool nir_like = bands[b].wavelength_nm && *bands[b].wavelength_nm >= 700.0;
        double high_gain = nir_like ? cfg.nir_detail_coupling : cfg.rgb_detail_coupling;
        for (int c = 0; c < bands[b].channel_count; ++c) {
            size_t row = static_cast<size_t>(off + c);
            // Sample the two halves, then normalize each so every channel
            // carries the same contrast regardless of the draw.
            double norm_low = 0.0, norm_high = 0.0;
            for (int h = 0; h < width; ++h) {
                double w = rng.normal(0.0, 1.0);
                l1.weights[row * width + h] = w;
                (h < half ? norm_low : norm_high) += w * w;
            }
            norm_low = std::sqrt(norm_low);
            norm_high = std::sqrt(norm_high);
            for (int h = 0; h < width; ++h) {
                double target = h < half ? 2.2 / norm_low : 2.2 * high_gain / norm_high;
                l1.weights[row * width + h] *= target;
            }
            l1.biases[row] = 0.0;
        }
    }

    // Standardize every channel's pre-activation over the scene latents so
    // all bands span the same intensity range: rescale the row to a fixed
    // standard deviation, then shift the bias to a fixed mean.
    size_t s = features.size() / static_cast<size_t>(d);
    std::vector<double> hidden(s * static_cast<size_t>(width));
    for (size_t i = 0; i < s; ++i) {
        const double* f = features.data() + i * static_cast<size_t>(d);
        for (int h = 0; h < width; ++h) {
            double z = l0.biases[static_cast<size_t>(h)];
            const double* w = l0.weights.data() + static_cast<size_t>(h) * (d + 2);
            for (int k = 0; k < d; ++k) z += w[k] * f[k];
            z += w[d] * 1.5707963267948966;  // representative equatorial view
            hidden[i * static_cast<size_t>(width) + h] = elu(z);
        }
    }
    const double target_mean = -2.2, target_std = 1.0;
    for (int ch = 0; ch < total; ++ch) {
        double* row = l1.weights.data() + static_cast<size_t>(ch) * width;
        double mean = 0.0, var = 0.0;
        for (size_t i = 0; i < s; ++i) {
            double pre = 0.0;
            for (int h = 0; h < width; ++h) pre += row[h] * hidden[i * static_cast<size_t>(width) + h];
            mean += pre;
            var += pre * pre;
        }
        mean /= static_cast<double>(s);
        var = std::max(var / static_cast<double>(s) - mean * mean, 1e-8);
        double gain = target_std / std::sqrt(var);
        for (int h = 0; h < width; ++h) row[h] *= gain;
        l1.biases[static_cast<size_t>(ch)] = target_mean - mean * gain;
    }
    return dec;
}

/// Unit directions roughly evenly spread on the sphere, away from the poles.
inline Vec3 fibonacci_direction(int i, int n) {
    double golden = 2.39996322972865332;  // radians
    double z = 0.8 - 1.6 * (i + 0.5) / n;
    double r = std::sqrt(1.0 - z * z);
    double a = golden * i;
    return {r * std::cos(a), r * std::sin(a), z};
}

inline Mat3 look_at_rotation(const Vec3& eye, const Vec3& target) {
    Vec3 forward = (target - eye).normalized();  // camera +z
    Vec3 up{0.0, 0.0, 1.0};
    if (std::fabs(forward.dot(up)) > 0.98) up = {0.0, 1.0, 0.0};
    Vec3 right{forward.y * up.z - forward.z * up.y, forward.z * up.x - forward.x * up.z,
               forward.x * up.y - forward.y * up.x};
    right = right.normalized();
    Vec3 down{forward.y * right.z - forward.z * right.y, forward.z * right.x - forward.x * right.z,
              forward.x * right.y - forward.y * right.x};
    Mat3 r;  // rows: camera axes in world coordinates (world-to-camera)
    r.m[0][0] = right.x;
    r.m[0][1] = right.y;
    r.m[0][2] = right.z;
    r.m[1][0] = down.x;
    r.m[1][1] = down.y;
    r.m[1][2] = down.z;
    r.m[2][0] = forward.x;
    r.m[2][1] = forward.y;
    r.m[2][2] = forward.z;
    return r;
}

}  // namespace synth_detail

/// Generates an on-disk dataset plus its generating checkpoint. The cloud is
/// a well-conditioned random scene whose band intensities are smooth
/// functions of shared per-primitive material latents, so bands genuinely
/// share information. Cameras sit on a sphere looking inward, with one pose
/// set shared by all bands (a co-located rig). Images are rendered by the
/// forward rasterizer from the returned checkpoint and written as 16-bit
/// PNGs; sparse points reuse the primitive centers.
inline Checkpoint make_synthetic_scene(const std::string& root, const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    require(cfg.n_gaussians >= 8 && cfg.views_per_band >= 1 && cfg.image_size >= 16,
            ErrorClass::shape_mismatch, "synthetic scene parameters too small");
    Rng rng(cfg.seed);
    const SpectralBandSet& bands = cfg.band_set;
    int d = 8;

    GaussianCloud cloud;
    cloud.feature_dim = d;
    size_t s = static_cast<size_t>(cfg.n_gaussians);
    cloud.positions.resize(3 * s);
    cloud.rotations.resize(4 * s);
    cloud.log_scales.resize(3 * s);
    cloud.opacity_logits.resize(s);
    cloud.features.resize(s * static_cast<size_t>(d));

    // Spatial frequency basis for the latents: low half smooth, high half
    // detailed.
    std::vector<Vec3> latent_dirs(static_cast<size_t>(d));
    std::vector<double> latent_freq(static_cast<size_t>(d)), latent_phase(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        latent_dirs[static_cast<size_t>(k)] = dir.normalized();
        latent_freq[static_cast<size_t>(k)] = k < d / 2 ? rng.uniform(0.8, 1.8) : rng.uniform(2.5, 5.5);
        latent_phase[static_cast<size_t>(k)] = rng.uniform(0.0, 6.283185307179586);
    }

    for (size_t i = 0; i < s; ++i) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        dir = dir.normalized();
        double radius = std::cbrt(rng.uniform());
        Vec3 p = dir * radius;
        cloud.positions[3 * i] = p.x;
        cloud.positions[3 * i + 1] = p.y;
        cloud.positions[3 * i + 2] = p.z;

        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        double qn = q.norm();
        cloud.rotations[4 * i] = q.w / qn;
        cloud.rotations[4 * i + 1] = q.x / qn;
        cloud.rotations[4 * i + 2] = q.y / qn;
        cloud.rotations[4 * i + 3] = q.z / qn;

        double base = std::log(0.10 * std::cbrt(100.0 / cfg.n_gaussians));
        for (int k = 0; k < 3; ++k) cloud.log_scales[3 * i + k] = base + rng.uniform(-0.25, 0.25);
        cloud.opacity_logits[i] = logit(rng.uniform(0.55, 0.95));

        double* f = cloud.feature(i);
        double norm2 = 0.0;
        for (int k = 0; k < d; ++k) {
            double phase = latent_freq[static_cast<size_t>(k)] *
                               p.dot(latent_dirs[static_cast<size_t>(k)]) +
                           latent_phase[static_cast<size_t>(k)];
            f[k] = std::sin(phase);
            norm2 += f[k] * f[k];
        }
        double inv = 1.0 / std::sqrt(std::max(norm2, 1e-9));
        for (int k = 0; k < d; ++k) f[k] *= inv;
    }

    Checkpoint gt;
    gt.bands = bands;
    gt.cloud = std::move(cloud);
    gt.color_model = ColorModelKind::neural;
    gt.decoder = synth_detail::build_gt_decoder(bands, cfg, gt.cloud.features, rng);
    gt.iteration = 0;
    gt.config.feature_dim = d;
    gt.config.seed = cfg.seed;

    // One pose per view index, shared across bands. Narrow bands share one
    // set of intrinsics; RGB gets its own.
    std::vector<Vec3> eyes;
    std::vector<Mat3> rotations;
    for (int v = 0; v < cfg.views_per_band; ++v) {
        Vec3 dir = synth_detail::fibonacci_direction(v, cfg.views_per_band);
        double dist = 2.8 + 0.3 * rng.uniform();
        Vec3 eye = dir * dist;
        eyes.push_back(eye);
        rotations.push_back(synth_detail::look_at_rotation(eye, Vec3{0, 0, 0}));
    }

    fs::create_directories(fs::path(root) / "sparse");
    std::vector<ColmapCamera> cameras;
    std::vector<ColmapImage> images;
    std::map<int, int> camera_to_band;
    double f_rgb = 1.5 * cfg.image_size, f_ms = 1.45 * cfg.image_size;
    for (int b = 0; b < bands.size(); ++b) {
        ColmapCamera cam;
        cam.camera_id = b + 1;
        cam.width = cam.height = cfg.image_size;
        cam.fx = cam.fy = bands[b].is_rgb() ? f_rgb : f_ms;
        cam.cx = cam.cy = 0.5 * cfg.image_size;
        cameras.push_back(cam);
        camera_to_band[cam.camera_id] = b;
    }

    ColorModel model;
    model.kind = ColorModelKind::neural;
    model.decoder = gt.decoder;

    int image_id = 1;
    char name[64];
    for (int b = 0; b < bands.size(); ++b) {
        fs::create_directories(fs::path(root) / ("images_" + bands[b].name));
        for (int v = 0; v < cfg.views_per_band; ++v) {
            CameraView view;
            view.camera_id = b + 1;
            view.band_index = b;
            view.fx = cameras[static_cast<size_t>(b)].fx;
            view.fy = cameras[static_cast<size_t>(b)].fy;
            view.cx = cameras[static_cast<size_t>(b)].cx;
            view.cy = cameras[static_cast<size_t>(b)].cy;
            view.width = view.height = cfg.image_size;
            view.rotation = rotations[static_cast<size_t>(v)];
            Vec3 rc = view.rotation * eyes[static_cast<size_t>(v)];
            view.translation = {-rc.x, -rc.y, -rc.z};

            Image img = render_image(gt.cloud, model, bands, b, view, 0.0);
            std::snprintf(name, sizeof name, "view_%03d.png", v);
            write_image16(img, (fs::path(root) / ("images_" + bands[b].name) / name).string());

            ColmapImage ci;
            ci.image_id = image_id++;
            ci.q = quat_from_rotation(view.rotation);
            ci.t = view.translation;
            ci.camera_id = b + 1;
            ci.name = name;
            images.push_back(ci);
        }
    }

    write_colmap_cameras((fs::path(root) / "sparse" / "cameras.txt").string(), cameras);
    write_colmap_images((fs::path(root) / "sparse" / "images.txt").string(), images);
    SparsePoints points;
    for (size_t i = 0; i < gt.cloud.count(); ++i) points.positions.push_back(gt.cloud.position(i));
    write_colmap_points((fs::path(root) / "sparse" / "points3D.txt").string(), points);
    write_band_manifest((fs::path(root) / "bands.toml").string(), bands, camera_to_band);
    save_checkpoint(gt, (fs::path(root) / "gt.ckpt").string());
    return gt;
}

}  // namespace msplat
