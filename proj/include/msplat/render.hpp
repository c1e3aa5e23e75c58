#pragma once

#include <vector>

#include "msplat/bands.hpp"
#include "msplat/cloud.hpp"
#include "msplat/decoder.hpp"
#include "msplat/rasterizer.hpp"
#include "msplat/sh_model.hpp"

namespace msplat {

/// Appearance backing for rendering: the shared neural decoder or the
/// per-band SH baseline.
struct ColorModel {
    ColorModelKind kind = ColorModelKind::neural;
    ColorDecoder decoder;  // neural
    SHColorModel sh;       // per_band_sh
};

/// Everything produced while rendering one band of one view that the
/// backward pass needs again.
struct RenderBundle {
    Projected2D projected;
    RenderAux aux;
    std::vector<int> visible_rows;        // primitive id per decode row
    std::vector<double> directions;       // rows x 2 (theta, phi), neural only
    std::vector<Vec3> direction_vectors;  // rows, unit world-space, SH only
    DecodeCache cache;                    // neural only
    std::vector<double> colors;           // S x C, zero for invisible rows
    std::vector<double> opacities;        // S, activated
    Image image;
};

/// Renders one spectral band of the scene into `view`. Appearance is decoded
/// in world space per primitive (frustum-visible ones only; invisible rows
/// never reach the compositor) and alpha-blended by the tile rasterizer.
inline RenderBundle render_view(const GaussianCloud& cloud, const ColorModel& model,
                                const SpectralBandSet& bands, int band_index,
                                const CameraView& view, const std::vector<double>& background,
                                const RasterizeOptions& opts = {}) {
    int cc = bands[band_index].channel_count;
    require(static_cast<int>(background.size()) == cc, ErrorClass::shape_mismatch,
            "background channel count does not match band");

    RenderBundle b;
    b.projected = project(cloud, view);
    size_t s = cloud.count();

    for (size_t i = 0; i < s; ++i)
        if (b.projected.visible[i]) b.visible_rows.push_back(static_cast<int>(i));
    size_t rows = b.visible_rows.size();

    Vec3 cam = view.camera_center();
    b.opacities.resize(s);
    for (size_t i = 0; i < s; ++i) b.opacities[i] = cloud.opacity(i);

    b.colors.assign(s * static_cast<size_t>(cc), 0.0);
    if (model.kind == ColorModelKind::neural) {
        int d = model.decoder.feature_dim;
        require(d == cloud.feature_dim, ErrorClass::dimension_mismatch,
                "decoder feature dim does not match cloud");
        std::vector<double> feats(rows * static_cast<size_t>(d));
        b.directions.resize(rows * 2);
        for (size_t r = 0; r < rows; ++r) {
            size_t i = static_cast<size_t>(b.visible_rows[r]);
            const double* f = cloud.feature(i);
            std::copy(f, f + d, feats.begin() + static_cast<ptrdiff_t>(r * d));
            Vec2 sph = direction_to_spherical(cloud.position(i) - cam);
            b.directions[2 * r] = sph.x;
            b.directions[2 * r + 1] = sph.y;
        }
        std::vector<double> full = decode_forward(feats, b.directions, static_cast<int>(rows),
                                                  model.decoder, &b.cache);
        int off = bands.channel_offset(band_index);
        int out_dim = model.decoder.output_dim;
        require(out_dim == bands.total_channels(), ErrorClass::dimension_mismatch,
                "decoder output dim does not match band set");
        for (size_t r = 0; r < rows; ++r) {
            size_t i = static_cast<size_t>(b.visible_rows[r]);
            for (int c = 0; c < cc; ++c)
                b.colors[i * cc + c] = full[r * static_cast<size_t>(out_dim) + off + c];
        }
    } else {
        b.direction_vectors.resize(rows);
        for (size_t r = 0; r < rows; ++r) {
            size_t i = static_cast<size_t>(b.visible_rows[r]);
            b.direction_vectors[r] = (cloud.position(i) - cam).normalized();
        }
        std::vector<double> vals;
        {
            // Evaluate only the visible rows' coefficients.
            SHColorModel sub;
            sub.degree = model.sh.degree;
            sub.total_channels = model.sh.total_channels;
            size_t fpp = model.sh.floats_per_primitive();
            sub.coeffs.resize(rows * fpp);
            for (size_t r = 0; r < rows; ++r)
                std::copy(model.sh.coeffs.begin() + static_cast<ptrdiff_t>(b.visible_rows[r] * fpp),
                          model.sh.coeffs.begin() + static_cast<ptrdiff_t>((b.visible_rows[r] + 1) * fpp),
                          sub.coeffs.begin() + static_cast<ptrdiff_t>(r * fpp));
            vals = sh_eval(sub, b.direction_vectors, bands, band_index);
        }
        for (size_t r = 0; r < rows; ++r) {
            size_t i = static_cast<size_t>(b.visible_rows[r]);
            for (int c = 0; c < cc; ++c) b.colors[i * cc + c] = vals[r * cc + c];
        }
    }

    b.image = rasterize_forward(b.projected, b.colors, b.opacities, view, background, &b.aux, opts);
    return b;
}

/// Plain image render when no gradients are needed.
inline Image render_image(const GaussianCloud& cloud, const ColorModel& model,
                          const SpectralBandSet& bands, int band_index, const CameraView& view,
                          const std::vector<double>& background) {
    return render_view(cloud, model, bands, band_index, view, background).image;
}

inline Image render_image(const GaussianCloud& cloud, const ColorModel& model,
                          const SpectralBandSet& bands, int band_index, const CameraView& view,
                          double background_value = 0.0) {
    std::vector<double> bg(static_cast<size_t>(bands[band_index].channel_count),
                           background_value);
    return render_image(cloud, model, bands, band_index, view, bg);
}

}  // namespace msplat
