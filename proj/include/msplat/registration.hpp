#pragma once

#include <cmath>
#include <vector>

#include "msplat/common.hpp"
#include "msplat/image.hpp"

namespace msplat {

// ---------------------------------------------------------------------------
// Mutual information from joint histograms
// ---------------------------------------------------------------------------

namespace mi_detail {

inline int bin_of(double v, int bins) {
    int b = static_cast<int>(std::clamp(v, 0.0, 1.0) * bins);
    return std::min(b, bins - 1);
}

/// MI over the pixels selected by `mask` (all pixels when mask is empty).
inline double mutual_information_masked(const Image& a, const Image& b, int bins,
                                        const std::vector<uint8_t>& mask) {
    require_same_shape(a, b);
    require(a.channels == 1 && b.channels == 1, ErrorClass::shape_mismatch,
            "mutual information expects single-channel images");
    require(bins >= 2, ErrorClass::shape_mismatch, "need at least two histogram bins");
    std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
    std::vector<double> pa(static_cast<size_t>(bins), 0.0), pb(static_cast<size_t>(bins), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        int ba = bin_of(a.data[i], bins);
        int bb = bin_of(b.data[i], bins);
        joint[static_cast<size_t>(ba) * bins + bb] += 1.0;
        total += 1.0;
    }
    if (total <= 0.0) return 0.0;
    for (int i = 0; i < bins; ++i)
        for (int j = 0; j < bins; ++j) {
            double c = joint[static_cast<size_t>(i) * bins + j];
            pa[static_cast<size_t>(i)] += c;
            pb[static_cast<size_t>(j)] += c;
        }
    double mi = 0.0;
    for (int i = 0; i < bins; ++i)
        for (int j = 0; j < bins; ++j) {
            double pj = joint[static_cast<size_t>(i) * bins + j] / total;
            if (pj <= 0.0) continue;  // empty cells contribute nothing
            double pi = pa[static_cast<size_t>(i)] / total;
            double qj = pb[static_cast<size_t>(j)] / total;
            mi += pj * std::log(pj / (pi * qj));
        }
    return mi;
}

}  // namespace mi_detail

/// Histogram-estimated mutual information in nats over [0, 1] intensities.
inline double mutual_information(const Image& a, const Image& b, int bins = 32) {
    return mi_detail::mutual_information_masked(a, b, bins, {});
}

/// Histogram entropy of one image, in nats; equals MI(A, A).
inline double histogram_entropy(const Image& a, int bins = 32) {
    std::vector<double> hist(static_cast<size_t>(bins), 0.0);
    for (double v : a.data) hist[static_cast<size_t>(mi_detail::bin_of(v, bins))] += 1.0;
    double total = static_cast<double>(a.data.size());
    double h = 0.0;
    for (double c : hist) {
        if (c <= 0.0) continue;
        double p = c / total;
        h -= p * std::log(p);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Rigid warp and Powell registration
// ---------------------------------------------------------------------------

struct RigidTransform {
    double tx = 0.0;
    double ty = 0.0;
    double phi = 0.0;  // radians, counterclockwise about the image center
};

struct WarpedImage {
    Image image;
    std::vector<uint8_t> valid;  // in-bounds sample mask
};

/// Moves the image content by (tx, ty) pixels and rotates it by phi about
/// the center, with bilinear resampling. Samples falling outside the source
/// are zero and flagged invalid.
inline WarpedImage warp_rigid(const Image& img, const RigidTransform& t) {
    require(img.channels == 1, ErrorClass::shape_mismatch, "warp expects single-channel images");
    WarpedImage out;
    out.image = Image(img.width, img.height, 1);
    out.valid.assign(img.pixel_count(), 0);
    double cx = 0.5 * img.width, cy = 0.5 * img.height;
    double c = std::cos(-t.phi), s = std::sin(-t.phi);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            // Inverse map of dst = R_phi (src - c) + c + t.
            double dx = (x + 0.5) - cx - t.tx;
            double dy = (y + 0.5) - cy - t.ty;
            double sx = c * dx - s * dy + cx - 0.5;
            double sy = s * dx + c * dy + cy - 0.5;
            int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            if (x0 < 0 || y0 < 0 || x0 + 1 >= img.width || y0 + 1 >= img.height) continue;
            double fx = sx - x0, fy = sy - y0;
            double v = (1 - fx) * (1 - fy) * img.at(x0, y0, 0) +
                       fx * (1 - fy) * img.at(x0 + 1, y0, 0) +
                       (1 - fx) * fy * img.at(x0, y0 + 1, 0) +
                       fx * fy * img.at(x0 + 1, y0 + 1, 0);
            out.image.at(x, y, 0) = v;
            out.valid[static_cast<size_t>(y) * img.width + x] = 1;
        }
    return out;
}

struct RegistrationSearch {
    double max_translation = 16.0;   // px, per axis
    double max_rotation = 0.1;       // radians
    int bins = 32;
    int restarts = 3;                // jittered Powell starts
    uint64_t seed = 7;
};

struct RegistrationResult {
    RigidTransform transform;
    double mi = 0.0;
    double identity_mi = 0.0;
};

namespace mi_detail {

inline double objective(const Image& ref, const Image& moving, const RigidTransform& t,
                        int bins) {
    WarpedImage w = warp_rigid(moving, t);
    return mutual_information_masked(ref, w.image, bins, w.valid);
}

/// Golden-section maximization of f over [lo, hi].
template <typename F>
inline double golden_max(F&& f, double lo, double hi, double tol) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace mi_detail

/// Rigid registration maximizing mutual information with Powell-style
/// coordinate sweeps (golden-section line searches over tx, ty, phi inside
/// caller-supplied bounds). Restarts from a few jittered seeds and never
/// returns a transform scoring below the identity.
inline RegistrationResult mi_register(const Image& ref, const Image& moving,
                                      const RegistrationSearch& search = {}) {
    require_same_shape(ref, moving);
    auto is_constant = [](const Image& img) {
        for (double v : img.data)
            if (v != img.data[0]) return false;
        return true;
    };
    require(!is_constant(ref) && !is_constant(moving), ErrorClass::no_signal,
            "registration needs non-constant images");

    RegistrationResult result;
    result.identity_mi = mi_detail::objective(ref, moving, {}, search.bins);
    result.transform = {};
    result.mi = result.identity_mi;

    Rng rng(search.seed);
    double tmax = search.max_translation, rmax = search.max_rotation;
    for (int restart = 0; restart < std::max(1, search.restarts); ++restart) {
        RigidTransform cur{};
        if (restart > 0) {
            cur.tx = rng.uniform(-0.25 * tmax, 0.25 * tmax);
            cur.ty = rng.uniform(-0.25 * tmax, 0.25 * tmax);
            cur.phi = rng.uniform(-0.25 * rmax, 0.25 * rmax);
        }
        double cur_mi = mi_detail::objective(ref, moving, cur, search.bins);
        for (int sweep = 0; sweep < 6; ++sweep) {
            double before = cur_mi;
            cur.tx = mi_detail::golden_max(
                [&](double v) {
                    RigidTransform t = cur;
                    t.tx = v;
                    return mi_detail::objective(ref, moving, t, search.bins);
                },
                -tmax, tmax, 5e-3);
            cur.ty = mi_detail::golden_max(
                [&](double v) {
                    RigidTransform t = cur;
                    t.ty = v;
                    return mi_detail::objective(ref, moving, t, search.bins);
                },
                -tmax, tmax, 5e-3);
            if (rmax > 0.0)
                cur.phi = mi_detail::golden_max(
                    [&](double v) {
                        RigidTransform t = cur;
                        t.phi = v;
                        return mi_detail::objective(ref, moving, t, search.bins);
                    },
                    -rmax, rmax, 1e-4);
            cur_mi = mi_detail::objective(ref, moving, cur, search.bins);
            if (cur_mi - before < 1e-6) break;
        }
        if (cur_mi > result.mi) {
            result.mi = cur_mi;
            result.transform = cur;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gradient error map
// ---------------------------------------------------------------------------

/// Sobel gradient magnitude with replicated borders.
inline Image sobel_magnitude(const Image& img) {
    require(img.channels == 1, ErrorClass::shape_mismatch, "expected single-channel image");
    Image out(img.width, img.height, 1);
    auto sample = [&](int x, int y) {
        x = std::clamp(x, 0, img.width - 1);
        y = std::clamp(y, 0, img.height - 1);
        return img.at(x, y, 0);
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double gx = -sample(x - 1, y - 1) - 2 * sample(x - 1, y) - sample(x - 1, y + 1) +
                        sample(x + 1, y - 1) + 2 * sample(x + 1, y) + sample(x + 1, y + 1);
            double gy = -sample(x - 1, y - 1) - 2 * sample(x, y - 1) - sample(x + 1, y - 1) +
                        sample(x - 1, y + 1) + 2 * sample(x, y + 1) + sample(x + 1, y + 1);
            out.at(x, y, 0) = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

/// Structural discrepancy of two images: pixelwise absolute difference of
/// their Sobel gradient magnitudes. Symmetric in its arguments.
inline Image gradient_error_map(const Image& a, const Image& b) {
    require_same_shape(a, b);
    Image ga = sobel_magnitude(a);
    Image gb = sobel_magnitude(b);
    Image out(a.width, a.height, 1);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::fabs(ga.data[i] - gb.data[i]);
    return out;
}

}  // namespace msplat
