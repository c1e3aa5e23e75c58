#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "msplat/camera.hpp"
#include "msplat/common.hpp"
#include "msplat/image.hpp"
#include "msplat/projection.hpp"

namespace msplat {

constexpr int kTileSize = 16;
constexpr double kAlphaClamp = 0.99;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kTransmittanceEps = 1e-4;

struct RasterizeOptions {
    bool early_termination = true;
};

/// Per-view compositing record: tile contributor lists in global
/// front-to-back order, per-pixel final transmittance and blend walk length,
/// and per-primitive pixel-touch counts.
struct RenderAux {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> tile_gaussians;  // per tile, depth-sorted primitive ids
    std::vector<double> final_transmittance;       // H*W
    std::vector<int> last_contributor;             // H*W, position+1 in the tile list, 0 = none
    std::vector<int> touched;                      // per primitive: pixels blended
    std::vector<uint8_t> participated;             // per primitive: touched > 0

    int tile_index_of_pixel(int px, int py) const {
        return (py / kTileSize) * tiles_x + px / kTileSize;
    }
};

namespace detail {

/// Depth order over visible primitives; equal depths resolve by ascending
/// primitive index so the composite is reproducible.
inline std::vector<int> depth_order(const Projected2D& p) {
    std::vector<int> order;
    order.reserve(p.count());
    for (size_t i = 0; i < p.count(); ++i)
        if (p.visible[i]) order.push_back(static_cast<int>(i));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (p.depth[static_cast<size_t>(a)] != p.depth[static_cast<size_t>(b)])
            return p.depth[static_cast<size_t>(a)] < p.depth[static_cast<size_t>(b)];
        return a < b;
    });
    return order;
}

struct TileRange {
    int x0, x1, y0, y1;  // tile indices, half-open
};

/// Tiles whose pixel block intersects [mean - radius, mean + radius];
/// half-open tile index ranges.
inline TileRange tile_range(const Vec2& mean, double radius, int tiles_x, int tiles_y) {
    TileRange r;
    r.x0 = std::clamp(static_cast<int>(std::floor((mean.x - radius) / kTileSize)), 0, tiles_x);
    r.x1 = std::clamp(static_cast<int>(std::floor((mean.x + radius) / kTileSize)) + 1, 0, tiles_x);
    r.y0 = std::clamp(static_cast<int>(std::floor((mean.y - radius) / kTileSize)), 0, tiles_y);
    r.y1 = std::clamp(static_cast<int>(std::floor((mean.y + radius) / kTileSize)) + 1, 0, tiles_y);
    return r;
}

inline double gaussian_alpha(double opacity, const double* conic, double dx, double dy) {
    double q = conic[0] * dx * dx + 2.0 * conic[1] * dx * dy + conic[2] * dy * dy;
    if (q < 0.0) return 0.0;
    return std::min(kAlphaClamp, opacity * std::exp(-0.5 * q));
}

}  // namespace detail

/// Alpha-composites one band's channels front to back:
///   pixel = sum_i c_i * alpha_i * T_i + T_final * background,
///   T_i = prod_{j<i} (1 - alpha_j),
/// with alpha_i = opacity_i * exp(-1/2 d^T conic d) clamped to <= 0.99.
/// Contributors below alpha 1/255 are skipped; with early termination on,
/// blending stops before a contribution would push T under 1e-4.
/// Tiles run in parallel; pixels are owned by exactly one tile.
inline Image rasterize_forward(const Projected2D& projected, const std::vector<double>& colors,
                               const std::vector<double>& opacities, const CameraView& view,
                               const std::vector<double>& background, RenderAux* aux = nullptr,
                               const RasterizeOptions& opts = {}) {
    size_t s = projected.count();
    size_t channels = background.size();
    require(channels >= 1, ErrorClass::shape_mismatch, "background must have >= 1 channel");
    require(colors.size() == s * channels, ErrorClass::shape_mismatch,
            "color array does not match primitive count x channel count");
    require(opacities.size() == s, ErrorClass::shape_mismatch, "opacity array size mismatch");

    int w = view.width, h = view.height;
    int tiles_x = (w + kTileSize - 1) / kTileSize;
    int tiles_y = (h + kTileSize - 1) / kTileSize;

    std::vector<int> order = detail::depth_order(projected);
    std::vector<std::vector<int>> tile_lists(static_cast<size_t>(tiles_x) * tiles_y);
    for (int id : order) {
        auto r = detail::tile_range(projected.mean2d[static_cast<size_t>(id)],
                                    projected.radius[static_cast<size_t>(id)], tiles_x, tiles_y);
        for (int ty = r.y0; ty < r.y1; ++ty)
            for (int tx = r.x0; tx < r.x1; ++tx)
                tile_lists[static_cast<size_t>(ty) * tiles_x + tx].push_back(id);
    }

    Image img(w, h, static_cast<int>(channels));
    std::vector<double> final_t(static_cast<size_t>(w) * h, 1.0);
    std::vector<int> last_contrib(static_cast<size_t>(w) * h, 0);
    // Per-tile touch counts, folded in tile order afterwards.
    std::vector<std::vector<int>> tile_touched(tile_lists.size());

    parallel_for(tile_lists.size(), [&](size_t tile) {
        const std::vector<int>& list = tile_lists[tile];
        tile_touched[tile].assign(list.size(), 0);
        int tx = static_cast<int>(tile) % tiles_x;
        int ty = static_cast<int>(tile) / tiles_x;
        int x0 = tx * kTileSize, x1 = std::min(w, x0 + kTileSize);
        int y0 = ty * kTileSize, y1 = std::min(h, y0 + kTileSize);
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                double cx = px + 0.5, cy = py + 0.5;
                double t = 1.0;
                size_t pix = static_cast<size_t>(py) * w + px;
                double* out = img.data.data() + pix * channels;
                int last = 0;
                for (size_t li = 0; li < list.size(); ++li) {
                    int id = list[li];
                    const Vec2& mu = projected.mean2d[static_cast<size_t>(id)];
                    double alpha =
                        detail::gaussian_alpha(opacities[static_cast<size_t>(id)],
                                               projected.conic.data() + 3 * static_cast<size_t>(id),
                                               cx - mu.x, cy - mu.y);
                    if (alpha < kAlphaSkip) continue;
                    double test_t = t * (1.0 - alpha);
                    if (opts.early_termination && test_t < kTransmittanceEps) break;
                    const double* c = colors.data() + static_cast<size_t>(id) * channels;
                    for (size_t ch = 0; ch < channels; ++ch) out[ch] += c[ch] * alpha * t;
                    t = test_t;
                    tile_touched[tile][li] += 1;
                    last = static_cast<int>(li) + 1;
                }
                for (size_t ch = 0; ch < channels; ++ch) out[ch] += t * background[ch];
                final_t[pix] = t;
                last_contrib[pix] = last;
            }
        }
    });

    if (aux) {
        aux->tiles_x = tiles_x;
        aux->tiles_y = tiles_y;
        aux->tile_gaussians = std::move(tile_lists);
        aux->final_transmittance = std::move(final_t);
        aux->last_contributor = std::move(last_contrib);
        aux->touched.assign(s, 0);
        for (size_t tile = 0; tile < aux->tile_gaussians.size(); ++tile) {
            const auto& list = aux->tile_gaussians[tile];
            for (size_t li = 0; li < list.size(); ++li)
                aux->touched[static_cast<size_t>(list[li])] += tile_touched[tile][li];
        }
        aux->participated.assign(s, 0);
        for (size_t i = 0; i < s; ++i) aux->participated[i] = aux->touched[i] > 0 ? 1 : 0;
    }
    return img;
}

/// Screen-space gradients of the composite, per primitive. homodir is the
/// homodirectional positional gradient: per-pixel absolute values of the
/// mean2d gradient, summed componentwise — never smaller in magnitude than
/// the signed total.
struct RasterBackwardResult {
    std::vector<double> d_color;    // S * C
    std::vector<double> d_opacity;  // S
    std::vector<double> d_conic;    // 3S (packed a, b, c)
    std::vector<Vec2> d_mean2d;     // S, signed totals
    std::vector<Vec2> homodir;      // S, componentwise sums of absolutes
    std::vector<int> touched;       // S, pixels blended
};

/// Exact reverse of rasterize_forward. Walks each pixel's contributor list
/// back to front, replaying the forward skip and termination decisions from
/// the aux record. Per-primitive accumulation across tiles is reduced in
/// fixed tile order, so results are independent of the worker count.
inline RasterBackwardResult rasterize_backward(const Projected2D& projected,
                                               const std::vector<double>& colors,
                                               const std::vector<double>& opacities,
                                               const CameraView& view,
                                               const std::vector<double>& background,
                                               const RenderAux& aux, const Image& d_image) {
    size_t s = projected.count();
    size_t channels = background.size();
    require(d_image.width == view.width && d_image.height == view.height &&
                d_image.channels == static_cast<int>(channels),
            ErrorClass::shape_mismatch, "image gradient shape mismatch");
    require(aux.final_transmittance.size() == static_cast<size_t>(view.width) * view.height,
            ErrorClass::stale_cache, "aux does not match view");

    int w = view.width, h = view.height;
    int tiles_x = aux.tiles_x;

    struct TileGrads {
        std::vector<double> d_color;
        std::vector<double> d_opacity;
        std::vector<double> d_conic;
        std::vector<Vec2> d_mean2d;
        std::vector<Vec2> homodir;
        std::vector<int> touched;
    };
    std::vector<TileGrads> per_tile(aux.tile_gaussians.size());

    parallel_for(aux.tile_gaussians.size(), [&](size_t tile) {
        const std::vector<int>& list = aux.tile_gaussians[tile];
        TileGrads& tg = per_tile[tile];
        tg.d_color.assign(list.size() * channels, 0.0);
        tg.d_opacity.assign(list.size(), 0.0);
        tg.d_conic.assign(list.size() * 3, 0.0);
        tg.d_mean2d.assign(list.size(), Vec2{});
        tg.homodir.assign(list.size(), Vec2{});
        tg.touched.assign(list.size(), 0);

        int tx = static_cast<int>(tile) % tiles_x;
        int ty = static_cast<int>(tile) / tiles_x;
        int x0 = tx * kTileSize, x1 = std::min(w, x0 + kTileSize);
        int y0 = ty * kTileSize, y1 = std::min(h, y0 + kTileSize);

        std::vector<double> rest(channels);
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                size_t pix = static_cast<size_t>(py) * w + px;
                int last = aux.last_contributor[pix];
                if (last == 0) continue;
                double cxp = px + 0.5, cyp = py + 0.5;
                const double* dpix = d_image.data.data() + pix * channels;
                double t_behind = aux.final_transmittance[pix];
                for (size_t ch = 0; ch < channels; ++ch)
                    rest[ch] = t_behind * background[ch];

                for (int li = last - 1; li >= 0; --li) {
                    int id = list[static_cast<size_t>(li)];
                    const Vec2& mu = projected.mean2d[static_cast<size_t>(id)];
                    double dx = cxp - mu.x, dy = cyp - mu.y;
                    const double* con = projected.conic.data() + 3 * static_cast<size_t>(id);
                    double q = con[0] * dx * dx + 2.0 * con[1] * dx * dy + con[2] * dy * dy;
                    if (q < 0.0) continue;
                    double opa = opacities[static_cast<size_t>(id)];
                    double g = std::exp(-0.5 * q);
                    double alpha_raw = opa * g;
                    double alpha = std::min(kAlphaClamp, alpha_raw);
                    if (alpha < kAlphaSkip) continue;

                    double t_i = t_behind / (1.0 - alpha);
                    const double* c = colors.data() + static_cast<size_t>(id) * channels;
                    double d_alpha = 0.0;
                    for (size_t ch = 0; ch < channels; ++ch) {
                        tg.d_color[static_cast<size_t>(li) * channels + ch] +=
                            alpha * t_i * dpix[ch];
                        d_alpha += dpix[ch] * (c[ch] * t_i - rest[ch] / (1.0 - alpha));
                    }
                    tg.touched[static_cast<size_t>(li)] += 1;

                    if (alpha_raw < kAlphaClamp) {  // clamp gates the alpha chain
                        tg.d_opacity[static_cast<size_t>(li)] += g * d_alpha;
                        double dq = -0.5 * alpha * d_alpha;  // d(exp)/dq * opa = -alpha/2
                        tg.d_conic[static_cast<size_t>(li) * 3 + 0] += dq * dx * dx;
                        tg.d_conic[static_cast<size_t>(li) * 3 + 1] += dq * 2.0 * dx * dy;
                        tg.d_conic[static_cast<size_t>(li) * 3 + 2] += dq * dy * dy;
                        // d = pixel - mean, so dq/dmean = -(dq/dd)
                        double gx = -dq * (2.0 * con[0] * dx + 2.0 * con[1] * dy);
                        double gy = -dq * (2.0 * con[1] * dx + 2.0 * con[2] * dy);
                        tg.d_mean2d[static_cast<size_t>(li)].x += gx;
                        tg.d_mean2d[static_cast<size_t>(li)].y += gy;
                        tg.homodir[static_cast<size_t>(li)].x += std::fabs(gx);
                        tg.homodir[static_cast<size_t>(li)].y += std::fabs(gy);
                    }

                    for (size_t ch = 0; ch < channels; ++ch) rest[ch] += c[ch] * alpha * t_i;
                    t_behind = t_i;
                }
            }
        }
    });

    RasterBackwardResult out;
    out.d_color.assign(s * channels, 0.0);
    out.d_opacity.assign(s, 0.0);
    out.d_conic.assign(3 * s, 0.0);
    out.d_mean2d.assign(s, Vec2{});
    out.homodir.assign(s, Vec2{});
    out.touched.assign(s, 0);
    for (size_t tile = 0; tile < aux.tile_gaussians.size(); ++tile) {
        const auto& list = aux.tile_gaussians[tile];
        const TileGrads& tg = per_tile[tile];
        for (size_t li = 0; li < list.size(); ++li) {
            size_t id = static_cast<size_t>(list[li]);
            for (size_t ch = 0; ch < channels; ++ch)
                out.d_color[id * channels + ch] += tg.d_color[li * channels + ch];
            out.d_opacity[id] += tg.d_opacity[li];
            for (int k = 0; k < 3; ++k) out.d_conic[3 * id + k] += tg.d_conic[li * 3 + k];
            out.d_mean2d[id].x += tg.d_mean2d[li].x;
            out.d_mean2d[id].y += tg.d_mean2d[li].y;
            out.homodir[id].x += tg.homodir[li].x;
            out.homodir[id].y += tg.homodir[li].y;
            out.touched[id] += tg.touched[li];
        }
    }
    return out;
}

}  // namespace msplat
