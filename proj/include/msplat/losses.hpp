#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "msplat/common.hpp"
#include "msplat/image.hpp"

namespace msplat {

struct LossWeights {
    double lambda = 0.2;         // D-SSIM mix inside the image loss
    double lambda_norm = 0.1;    // feature norm regularizer
    double lambda_smooth = 0.0;  // optional, single-channel bands
    double lambda_cos = 0.0;     // optional, feature neighborhood coherence
    bool dssim_halved = false;   // (1 - SSIM)/2 variant
};

struct ScalarWithImageGrad {
    double value = 0.0;
    Image grad;
};

// ---------------------------------------------------------------------------
// L1
// ---------------------------------------------------------------------------

/// Mean absolute error; subgradient sign(pred - gt)/(H*W*C), 0 at equality.
inline ScalarWithImageGrad l1_loss(const Image& pred, const Image& gt) {
    require_same_shape(pred, gt);
    ScalarWithImageGrad out;
    out.grad = Image(pred.width, pred.height, pred.channels);
    double n = static_cast<double>(pred.value_count());
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        double d = pred.data[i] - gt.data[i];
        acc += std::fabs(d);
        out.grad.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.value = acc / n;
    return out;
}

// ---------------------------------------------------------------------------
// D-SSIM: 11x11 Gaussian window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2,
// evaluated at fully-covered window positions and averaged over positions
// and channels.
// ---------------------------------------------------------------------------

namespace ssim_detail {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

inline const std::array<double, kWindow>& kernel() {
    static const std::array<double, kWindow> k = [] {
        std::array<double, kWindow> g{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            double d = i - (kWindow - 1) / 2.0;
            g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += g[static_cast<size_t>(i)];
        }
        for (auto& v : g) v /= sum;
        return g;
    }();
    return k;
}

/// Valid separable correlation: (w x h) plane -> (w-10) x (h-10) map.
inline std::vector<double> valid_corr(const std::vector<double>& plane, int w, int h) {
    const auto& k = kernel();
    int ow = w - kWindow + 1, oh = h - kWindow + 1;
    std::vector<double> tmp(static_cast<size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWindow; ++t)
                s += k[static_cast<size_t>(t)] * plane[static_cast<size_t>(y) * w + x + t];
            tmp[static_cast<size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWindow; ++t)
                s += k[static_cast<size_t>(t)] * tmp[static_cast<size_t>(y + t) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = s;
        }
    return out;
}

/// Adjoint of valid_corr: scatters a (w-10) x (h-10) coefficient map back to
/// a (w x h) plane. With the symmetric kernel this is a zero-padded full
/// correlation.
inline std::vector<double> full_corr(const std::vector<double>& map, int w, int h) {
    const auto& k = kernel();
    int ow = w - kWindow + 1, oh = h - kWindow + 1;
    std::vector<double> tmp(static_cast<size_t>(ow) * h, 0.0);
    // Vertical adjoint: tmp(y) = sum_t k[t] * map(y - t) for valid rows.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWindow; ++t) {
                int my = y - t;
                if (my < 0 || my >= oh) continue;
                s += k[static_cast<size_t>(t)] * map[static_cast<size_t>(my) * ow + x];
            }
            tmp[static_cast<size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWindow; ++t) {
                int mx = x - t;
                if (mx < 0 || mx >= ow) continue;
                s += k[static_cast<size_t>(t)] * tmp[static_cast<size_t>(y) * ow + mx];
            }
            out[static_cast<size_t>(y) * w + x] = s;
        }
    return out;
}

inline std::vector<double> channel_plane(const Image& img, int c) {
    std::vector<double> plane(img.pixel_count());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            plane[static_cast<size_t>(y) * img.width + x] = img.at(x, y, c);
    return plane;
}

}  // namespace ssim_detail

/// SSIM mean over valid window positions and channels, with the analytic
/// gradient of the mean w.r.t. pred. Gradient pointer may be null.
inline double ssim_mean(const Image& pred, const Image& gt, Image* d_pred) {
    using namespace ssim_detail;
    require_same_shape(pred, gt);
    require(pred.width >= kWindow && pred.height >= kWindow, ErrorClass::shape_mismatch,
            "image smaller than the SSIM window");
    int w = pred.width, h = pred.height;
    int ow = w - kWindow + 1, oh = h - kWindow + 1;
    size_t map_n = static_cast<size_t>(ow) * oh;
    double total = 0.0;
    if (d_pred) *d_pred = Image(w, h, pred.channels);

    for (int c = 0; c < pred.channels; ++c) {
        std::vector<double> x = channel_plane(pred, c);
        std::vector<double> y = channel_plane(gt, c);
        std::vector<double> xx(x.size()), yy(y.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        std::vector<double> mx = valid_corr(x, w, h);
        std::vector<double> my = valid_corr(y, w, h);
        std::vector<double> mxx = valid_corr(xx, w, h);
        std::vector<double> myy = valid_corr(yy, w, h);
        std::vector<double> mxy = valid_corr(xy, w, h);

        std::vector<double> ca, cb, cc;
        if (d_pred) {
            ca.assign(map_n, 0.0);
            cb.assign(map_n, 0.0);
            cc.assign(map_n, 0.0);
        }
        double chan_sum = 0.0;
        for (size_t p = 0; p < map_n; ++p) {
            double sx = mxx[p] - mx[p] * mx[p];
            double sy = myy[p] - my[p] * my[p];
            double sxy = mxy[p] - mx[p] * my[p];
            double n1 = 2.0 * mx[p] * my[p] + kC1;
            double n2 = 2.0 * sxy + kC2;
            double d1 = mx[p] * mx[p] + my[p] * my[p] + kC1;
            double d2 = sx + sy + kC2;
            double s = (n1 * n2) / (d1 * d2);
            chan_sum += s;
            if (d_pred) {
                double e = 1.0 / (d1 * d2);
                // d s / d x_k = w_k * (A + B x_k + C y_k); see the window
                // statistics derivatives of n1, n2, d1, d2.
                ca[p] = e * (2.0 * my[p] * n2 - 2.0 * n1 * my[p]) -
                        s * e * (2.0 * mx[p] * d2 - 2.0 * d1 * mx[p]);
                cb[p] = -2.0 * s * e * d1;
                cc[p] = 2.0 * e * n1;
            }
        }
        total += chan_sum / static_cast<double>(map_n);

        if (d_pred) {
            double scale = 1.0 / (static_cast<double>(map_n) * pred.channels);
            for (size_t p = 0; p < map_n; ++p) {
                ca[p] *= scale;
                cb[p] *= scale;
                cc[p] *= scale;
            }
            std::vector<double> fa = full_corr(ca, w, h);
            std::vector<double> fb = full_corr(cb, w, h);
            std::vector<double> fc = full_corr(cc, w, h);
            for (int py = 0; py < h; ++py)
                for (int px = 0; px < w; ++px) {
                    size_t i = static_cast<size_t>(py) * w + px;
                    d_pred->at(px, py, c) = fa[i] + fb[i] * x[i] + fc[i] * y[i];
                }
        }
    }
    return total / pred.channels;
}

/// Structural dissimilarity 1 - SSIM (or (1 - SSIM)/2 when halved).
inline ScalarWithImageGrad dssim_loss(const Image& pred, const Image& gt, bool halved = false) {
    ScalarWithImageGrad out;
    double s = ssim_mean(pred, gt, &out.grad);
    double factor = halved ? 0.5 : 1.0;
    out.value = factor * (1.0 - s);
    for (auto& g : out.grad.data) g *= -factor;
    return out;
}

// ---------------------------------------------------------------------------
// Feature norm regularizer: sum_i (|f_i| - 1)^2 over all primitives
// ---------------------------------------------------------------------------

struct ScalarWithVecGrad {
    double value = 0.0;
    std::vector<double> grad;
};

/// Sum (not mean) over primitives of (|f_i|_2 - 1)^2; invariant under any
/// orthogonal map of feature space. Gradient is 0 at the singular point
/// f = 0.
inline ScalarWithVecGrad feature_norm_reg(const std::vector<double>& features, int dim) {
    ScalarWithVecGrad out;
    out.grad.assign(features.size(), 0.0);
    if (dim <= 0) return out;
    size_t s = features.size() / static_cast<size_t>(dim);
    for (size_t i = 0; i < s; ++i) {
        const double* f = features.data() + i * static_cast<size_t>(dim);
        double norm2 = 0.0;
        for (int k = 0; k < dim; ++k) norm2 += f[k] * f[k];
        double norm = std::sqrt(norm2);
        double dev = norm - 1.0;
        out.value += dev * dev;
        if (norm > 0.0) {
            double coef = 2.0 * dev / norm;
            double* g = out.grad.data() + i * static_cast<size_t>(dim);
            for (int k = 0; k < dim; ++k) g[k] = coef * f[k];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Smoothness: mean absolute difference to the four axis neighbors
// ---------------------------------------------------------------------------

/// (1/4M) sum over pixels of |up| + |down| + |left| + |right| differences,
/// border pixels using only the neighbors that exist. Single-channel images
/// only.
inline ScalarWithImageGrad smoothness_loss(const Image& pred) {
    require(pred.channels == 1, ErrorClass::shape_mismatch, "smoothness expects one channel");
    ScalarWithImageGrad out;
    out.grad = Image(pred.width, pred.height, 1);
    double m = static_cast<double>(pred.pixel_count());
    if (m == 0) return out;
    double inv = 1.0 / (4.0 * m);
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    double acc = 0.0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            double v = pred.at(x, y, 0);
            for (int k = 0; k < 4; ++k) {
                int nx = x + dx[k], ny = y + dy[k];
                if (nx < 0 || nx >= pred.width || ny < 0 || ny >= pred.height) continue;
                double d = pred.at(nx, ny, 0) - v;
                acc += std::fabs(d);
                double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                out.grad.at(nx, ny, 0) += sgn * inv;
                out.grad.at(x, y, 0) -= sgn * inv;
            }
        }
    out.value = acc * inv;
    return out;
}

// ---------------------------------------------------------------------------
// Cosine neighborhood loss over the feature kNN graph
// ---------------------------------------------------------------------------

/// Mean over centers of the mean over neighbors of (1 - cos(f_c, f_s)).
/// A zero-norm vector on either side makes the term contribute 1 with zero
/// gradient.
inline ScalarWithVecGrad cosine_knn_loss(const std::vector<double>& features, int dim,
                                         const std::vector<int>& knn, int k) {
    ScalarWithVecGrad out;
    out.grad.assign(features.size(), 0.0);
    if (dim <= 0 || k <= 0) return out;
    size_t s = features.size() / static_cast<size_t>(dim);
    require(knn.size() == s * static_cast<size_t>(k), ErrorClass::shape_mismatch,
            "kNN table size mismatch");
    if (s == 0) return out;
    double scale = 1.0 / (static_cast<double>(s) * k);
    for (size_t i = 0; i < s; ++i) {
        const double* fc = features.data() + i * static_cast<size_t>(dim);
        double nc2 = 0.0;
        for (int t = 0; t < dim; ++t) nc2 += fc[t] * fc[t];
        double nc = std::sqrt(nc2);
        for (int j = 0; j < k; ++j) {
            int nb = knn[i * static_cast<size_t>(k) + j];
            require(nb >= 0 && static_cast<size_t>(nb) < s, ErrorClass::index_out_of_range,
                    "kNN index out of range");
            const double* fs = features.data() + static_cast<size_t>(nb) * dim;
            double ns2 = 0.0, dot = 0.0;
            for (int t = 0; t < dim; ++t) {
                ns2 += fs[t] * fs[t];
                dot += fc[t] * fs[t];
            }
            double ns = std::sqrt(ns2);
            if (nc <= 0.0 || ns <= 0.0) {
                out.value += scale;  // convention for degenerate vectors
                continue;
            }
            double cosv = dot / (nc * ns);
            out.value += scale * (1.0 - cosv);
            double* gc = out.grad.data() + i * static_cast<size_t>(dim);
            double* gs = out.grad.data() + static_cast<size_t>(nb) * dim;
            for (int t = 0; t < dim; ++t) {
                gc[t] += scale * (-(fs[t] / (nc * ns)) + cosv * fc[t] / nc2);
                gs[t] += scale * (-(fc[t] / (nc * ns)) + cosv * fs[t] / ns2);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Combined training loss
// ---------------------------------------------------------------------------

struct TotalLoss {
    double value = 0.0;
    double image_term = 0.0;  // (1-lambda) L1 + lambda D-SSIM
    Image d_image;
    std::vector<double> d_features;
};

/// One band, one image per call:
///   (1-lambda) L1 + lambda D-SSIM + lambda_norm * feature regularizer,
/// plus the optional smoothness (single-channel renders) and cosine terms.
inline TotalLoss total_loss(const Image& pred, const Image& gt,
                            const std::vector<double>& features, int feature_dim,
                            const LossWeights& weights, const std::vector<int>* knn = nullptr,
                            int knn_k = 0) {
    TotalLoss out;
    ScalarWithImageGrad l1 = l1_loss(pred, gt);
    out.d_image = Image(pred.width, pred.height, pred.channels);
    out.image_term = (1.0 - weights.lambda) * l1.value;
    for (size_t i = 0; i < out.d_image.data.size(); ++i)
        out.d_image.data[i] = (1.0 - weights.lambda) * l1.grad.data[i];

    if (weights.lambda > 0.0) {
        ScalarWithImageGrad ds = dssim_loss(pred, gt, weights.dssim_halved);
        out.image_term += weights.lambda * ds.value;
        for (size_t i = 0; i < out.d_image.data.size(); ++i)
            out.d_image.data[i] += weights.lambda * ds.grad.data[i];
    }
    out.value = out.image_term;

    ScalarWithVecGrad reg = feature_norm_reg(features, feature_dim);
    out.value += weights.lambda_norm * reg.value;
    out.d_features.assign(features.size(), 0.0);
    for (size_t i = 0; i < features.size(); ++i)
        out.d_features[i] = weights.lambda_norm * reg.grad[i];

    if (weights.lambda_smooth > 0.0 && pred.channels == 1) {
        ScalarWithImageGrad sm = smoothness_loss(pred);
        out.value += weights.lambda_smooth * sm.value;
        for (size_t i = 0; i < out.d_image.data.size(); ++i)
            out.d_image.data[i] += weights.lambda_smooth * sm.grad.data[i];
    }
    if (weights.lambda_cos > 0.0 && knn != nullptr && knn_k > 0) {
        ScalarWithVecGrad cs = cosine_knn_loss(features, feature_dim, *knn, knn_k);
        out.value += weights.lambda_cos * cs.value;
        for (size_t i = 0; i < features.size(); ++i)
            out.d_features[i] += weights.lambda_cos * cs.grad[i];
    }
    return out;
}

}  // namespace msplat
