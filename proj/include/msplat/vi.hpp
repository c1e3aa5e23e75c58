#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "msplat/common.hpp"
#include "msplat/image.hpp"
#include "msplat/render.hpp"

namespace msplat {

enum class VegetationIndex { ndvi, gndvi, savi };

inline VegetationIndex vegetation_index_from_name(const std::string& name) {
    if (name == "ndvi") return VegetationIndex::ndvi;
    if (name == "gndvi") return VegetationIndex::gndvi;
    if (name == "savi") return VegetationIndex::savi;
    fail(ErrorClass::parse_error, "unknown vegetation index '" + name + "'");
}

struct VIResult {
    Image values;                // H x W x 1, in [-1, 1] where valid
    std::vector<uint8_t> valid;  // H*W mask; false where the denominator vanished
};

/// Pixelwise index from two single-channel band images rendered through the
/// identical camera:
///   NDVI  = (NIR - R) / (NIR + R)
///   GNDVI = (NIR - G) / (NIR + G)
///   SAVI  = (1 + L) (NIR - R) / (NIR + R + L)
/// Pixels whose NIR + visible sum falls under 1e-6 output 0 and are flagged
/// invalid.
inline VIResult vegetation_index_from_bands(const Image& nir, const Image& vis,
                                            VegetationIndex index, double l_soil = 0.5) {
    require_same_shape(nir, vis);
    require(nir.channels == 1, ErrorClass::shape_mismatch, "band images must be single-channel");
    VIResult out;
    out.values = Image(nir.width, nir.height, 1);
    out.valid.assign(nir.pixel_count(), 1);
    for (int y = 0; y < nir.height; ++y)
        for (int x = 0; x < nir.width; ++x) {
            double n = nir.at(x, y, 0), v = vis.at(x, y, 0);
            size_t pix = static_cast<size_t>(y) * nir.width + x;
            if (n + v < 1e-6) {
                out.valid[pix] = 0;
                continue;
            }
            double value;
            if (index == VegetationIndex::savi)
                value = (1.0 + l_soil) * (n - v) / (n + v + l_soil);
            else
                value = (n - v) / (n + v);
            out.values.at(x, y, 0) = std::clamp(value, -1.0, 1.0);
        }
    return out;
}

/// Renders the two required bands from the same camera — parallax-free by
/// construction — and combines them pixelwise. NDVI/SAVI use NIR and R;
/// GNDVI uses NIR and G. Missing bands are an error.
inline VIResult render_vegetation_index(const GaussianCloud& cloud, const ColorModel& model,
                                        const SpectralBandSet& bands, const CameraView& view,
                                        VegetationIndex index, double l_soil = 0.5) {
    int nir_band = bands.find_or_throw("NIR");
    const char* vis_name = (index == VegetationIndex::gndvi) ? "G" : "R";
    int vis_band = bands.find_or_throw(vis_name);
    require(bands[nir_band].channel_count == 1 && bands[vis_band].channel_count == 1,
            ErrorClass::band_not_found, "vegetation indices need single-channel bands");

    CameraView v = view;
    v.band_index = nir_band;
    Image nir = render_image(cloud, model, bands, nir_band, v, 0.0);
    v.band_index = vis_band;
    Image vis = render_image(cloud, model, bands, vis_band, v, 0.0);
    return vegetation_index_from_bands(nir, vis, index, l_soil);
}

// ---------------------------------------------------------------------------
// Display mapping
// ---------------------------------------------------------------------------

/// Plant-health bin for a value in [-1, 1]: below 0 inanimate, up to 0.33
/// diseased, up to 0.66 moderately healthy, up to 1 (inclusive) very healthy.
inline int vi_bin(double value) {
    if (value < 0.0) return 0;
    if (value < 0.33) return 1;
    if (value < 0.66) return 2;
    return 3;
}

struct ColorizedVI {
    Image rgb;  // H x (W + scale bar) x 3
    size_t clamped_pixels = 0;
};

/// Four-bin palette with breakpoints at 0, 0.33, 0.66 plus a vertical scale
/// bar strip on the right. Out-of-range values are clamped and counted.
inline ColorizedVI colorize_vi(const Image& vi) {
    require(vi.channels == 1, ErrorClass::shape_mismatch, "expected single-channel index image");
    static const std::array<std::array<double, 3>, 4> palette = {{
        {0.35, 0.30, 0.28},  // inanimate
        {0.80, 0.25, 0.10},  // diseased
        {0.95, 0.85, 0.25},  // moderately healthy
        {0.10, 0.60, 0.15},  // very healthy
    }};
    constexpr int bar_width = 12;
    ColorizedVI out;
    out.rgb = Image(vi.width + bar_width, vi.height, 3);
    for (int y = 0; y < vi.height; ++y)
        for (int x = 0; x < vi.width; ++x) {
            double v = vi.at(x, y, 0);
            if (v < -1.0 || v > 1.0) {
                v = std::clamp(v, -1.0, 1.0);
                out.clamped_pixels += 1;
            }
            const auto& c = palette[static_cast<size_t>(vi_bin(v))];
            for (int ch = 0; ch < 3; ++ch) out.rgb.at(x, y, ch) = c[static_cast<size_t>(ch)];
        }
    // Scale bar: top = +1, bottom = -1.
    for (int y = 0; y < vi.height; ++y) {
        double v = 1.0 - 2.0 * (y + 0.5) / vi.height;
        const auto& c = palette[static_cast<size_t>(vi_bin(v))];
        for (int x = vi.width; x < vi.width + bar_width; ++x)
            for (int ch = 0; ch < 3; ++ch) out.rgb.at(x, y, ch) = c[static_cast<size_t>(ch)];
    }
    return out;
}

/// Maps [-1, 1] to the full 16-bit range for file output.
inline Image vi_to_grayscale16(const Image& vi) {
    Image out(vi.width, vi.height, 1);
    for (size_t i = 0; i < vi.data.size(); ++i)
        out.data[i] = (std::clamp(vi.data[i], -1.0, 1.0) + 1.0) / 2.0;
    return out;
}

}  // namespace msplat
