#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "msplat/common.hpp"
#include "msplat/image.hpp"
#include "msplat/losses.hpp"
#include "msplat/render.hpp"

namespace msplat {

/// 10 log10(1 / MSE) for unit dynamic range; identical images give the
/// +infinity sentinel.
inline double psnr(const Image& pred, const Image& gt) {
    double m = mse(pred, gt);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

/// Mean SSIM with the same window constants as the D-SSIM loss.
inline double ssim_metric(const Image& pred, const Image& gt) {
    return ssim_mean(pred, gt, nullptr);
}

// ---------------------------------------------------------------------------
// Spectral similarity of two B-dimensional pixel spectra
// ---------------------------------------------------------------------------

/// Spectral angle in radians: arccos of the cosine similarity. Magnitude
/// (illumination) invariant.
inline double sam(const std::vector<double>& r, const std::vector<double>& t) {
    require(r.size() == t.size() && !r.empty(), ErrorClass::shape_mismatch,
            "spectra must have equal nonzero length");
    double rr = 0.0, tt = 0.0, rt = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        rr += r[i] * r[i];
        tt += t[i] * t[i];
        rt += r[i] * t[i];
    }
    require(rr > 0.0 && tt > 0.0, ErrorClass::undefined_spectrum, "zero spectrum");
    double c = std::clamp(rt / (std::sqrt(rr) * std::sqrt(tt)), -1.0, 1.0);
    return std::acos(c);
}

/// Pearson correlation of the two spectra; offset and scale invariant.
inline double scm(const std::vector<double>& r, const std::vector<double>& t) {
    require(r.size() == t.size() && !r.empty(), ErrorClass::shape_mismatch,
            "spectra must have equal nonzero length");
    double n = static_cast<double>(r.size());
    double mr = 0.0, mt = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        mr += r[i];
        mt += t[i];
    }
    mr /= n;
    mt /= n;
    double srr = 0.0, stt = 0.0, srt = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        double a = r[i] - mr, b = t[i] - mt;
        srr += a * a;
        stt += b * b;
        srt += a * b;
    }
    require(srr > 0.0 && stt > 0.0, ErrorClass::undefined_correlation, "zero-variance spectrum");
    return srt / (std::sqrt(srr) * std::sqrt(stt));
}

/// Symmetric KL divergence of the spectra normalized to probability
/// distributions, natural log. Components are clamped to >= 1e-8 inside the
/// logs; exact zero components contribute nothing.
inline double sid(const std::vector<double>& r, const std::vector<double>& t) {
    require(r.size() == t.size() && !r.empty(), ErrorClass::shape_mismatch,
            "spectra must have equal nonzero length");
    double sr = 0.0, st = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        sr += r[i];
        st += t[i];
    }
    require(sr > 0.0 && st > 0.0, ErrorClass::non_positive_sum, "spectrum sums must be positive");
    double acc = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        double p = r[i] / sr, q = t[i] / st;
        double lp = std::log(std::max(p, 1e-8)), lq = std::log(std::max(q, 1e-8));
        if (p > 0.0) acc += p * (lp - lq);
        if (q > 0.0) acc += q * (lq - lp);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Held-out evaluation
// ---------------------------------------------------------------------------

struct BandScore {
    std::string band;
    double psnr = 0.0;
    double ssim = 0.0;
    int view_count = 0;
};

struct EvalReport {
    std::vector<BandScore> per_band;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    // Pixelwise means over stacked multi-spectral vectors (RGB excluded),
    // averaged over all co-located eval pose groups.
    double sam_mean = std::numeric_limits<double>::quiet_NaN();
    double scm_mean = std::numeric_limits<double>::quiet_NaN();
    double sid_mean = std::numeric_limits<double>::quiet_NaN();
    size_t spectral_pixels = 0;   // pixels entering the spectral means
    size_t excluded_pixels = 0;   // zero-spectrum pixels skipped
    int stack_groups = 0;         // co-located pose groups found
};

/// Renders every eval view and scores it against ground truth. PSNR/SSIM are
/// averaged per band. The spectral metrics stack the single-channel bands
/// (band-set order) per pixel; this needs the bands rendered and captured
/// from identical poses, which NVS guarantees for synthesized stacks and the
/// synthetic datasets provide for ground truth. Pose groups without full
/// multi-spectral coverage are skipped.
inline EvalReport evaluate(const GaussianCloud& cloud, const ColorModel& model,
                           const SpectralBandSet& bands, const std::vector<CameraView>& views,
                           const std::vector<Image>& gt_images, double background_value = 0.0) {
    require(views.size() == gt_images.size(), ErrorClass::shape_mismatch,
            "views and ground-truth images disagree");
    EvalReport report;

    std::vector<double> psnr_sum(static_cast<size_t>(bands.size()), 0.0);
    std::vector<double> ssim_sum(static_cast<size_t>(bands.size()), 0.0);
    std::vector<int> view_count(static_cast<size_t>(bands.size()), 0);

    std::vector<Image> renders(views.size());
    for (size_t v = 0; v < views.size(); ++v) {
        int b = views[v].band_index;
        require(b >= 0 && b < bands.size(), ErrorClass::band_not_found,
                "eval view references a band outside the checkpoint band set");
        renders[v] = render_image(cloud, model, bands, b, views[v], background_value);
        psnr_sum[static_cast<size_t>(b)] += psnr(renders[v], gt_images[v]);
        ssim_sum[static_cast<size_t>(b)] += ssim_metric(renders[v], gt_images[v]);
        view_count[static_cast<size_t>(b)] += 1;
    }
    double tp = 0.0, ts = 0.0;
    int scored = 0;
    for (int b = 0; b < bands.size(); ++b) {
        if (view_count[static_cast<size_t>(b)] == 0) continue;
        BandScore s;
        s.band = bands[b].name;
        s.view_count = view_count[static_cast<size_t>(b)];
        s.psnr = psnr_sum[static_cast<size_t>(b)] / s.view_count;
        s.ssim = ssim_sum[static_cast<size_t>(b)] / s.view_count;
        report.per_band.push_back(s);
        tp += s.psnr;
        ts += s.ssim;
        ++scored;
    }
    if (scored > 0) {
        report.mean_psnr = tp / scored;
        report.mean_ssim = ts / scored;
    }

    // Group eval views by identical pose; a group covering every
    // single-channel band yields per-pixel spectra.
    std::vector<int> ms_bands;
    for (int b = 0; b < bands.size(); ++b)
        if (!bands[b].is_rgb()) ms_bands.push_back(b);
    if (ms_bands.size() < 2) return report;

    std::vector<int> group_of(views.size(), -1);
    std::vector<std::vector<size_t>> groups;
    for (size_t v = 0; v < views.size(); ++v) {
        for (size_t g = 0; g < groups.size(); ++g) {
            if (views[groups[g][0]].same_pose(views[v]) &&
                views[groups[g][0]].width == views[v].width &&
                views[groups[g][0]].height == views[v].height) {
                groups[g].push_back(v);
                group_of[v] = static_cast<int>(g);
                break;
            }
        }
        if (group_of[v] < 0) {
            groups.push_back({v});
            group_of[v] = static_cast<int>(groups.size()) - 1;
        }
    }

    double sam_acc = 0.0, scm_acc = 0.0, sid_acc = 0.0;
    size_t sam_n = 0, scm_n = 0, sid_n = 0;
    for (const auto& group : groups) {
        std::map<int, size_t> view_for_band;
        for (size_t v : group) view_for_band[views[v].band_index] = v;
        bool complete = true;
        for (int b : ms_bands)
            if (!view_for_band.count(b)) complete = false;
        if (!complete) continue;
        report.stack_groups += 1;

        size_t any = view_for_band[ms_bands[0]];
        int w = views[any].width, h = views[any].height;
        std::vector<double> pv(ms_bands.size()), gv(ms_bands.size());
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                double psum = 0.0, gsum = 0.0;
                for (size_t k = 0; k < ms_bands.size(); ++k) {
                    size_t v = view_for_band[ms_bands[k]];
                    pv[k] = renders[v].at(px, py, 0);
                    gv[k] = gt_images[v].at(px, py, 0);
                    psum += pv[k];
                    gsum += gv[k];
                }
                if (psum <= 0.0 || gsum <= 0.0) {
                    report.excluded_pixels += 1;
                    continue;
                }
                sam_acc += sam(gv, pv);
                sam_n += 1;
                sid_acc += sid(gv, pv);
                sid_n += 1;
                // Pearson additionally needs non-constant spectra.
                double vmin_p = pv[0], vmax_p = pv[0], vmin_g = gv[0], vmax_g = gv[0];
                for (size_t k = 1; k < ms_bands.size(); ++k) {
                    vmin_p = std::min(vmin_p, pv[k]);
                    vmax_p = std::max(vmax_p, pv[k]);
                    vmin_g = std::min(vmin_g, gv[k]);
                    vmax_g = std::max(vmax_g, gv[k]);
                }
                if (vmax_p > vmin_p && vmax_g > vmin_g) {
                    scm_acc += scm(gv, pv);
                    scm_n += 1;
                }
            }
        }
    }
    if (sam_n > 0) report.sam_mean = sam_acc / static_cast<double>(sam_n);
    if (scm_n > 0) report.scm_mean = scm_acc / static_cast<double>(scm_n);
    if (sid_n > 0) report.sid_mean = sid_acc / static_cast<double>(sid_n);
    report.spectral_pixels = sam_n;
    return report;
}

}  // namespace msplat
