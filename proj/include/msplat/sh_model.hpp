#pragma once

#include <vector>

#include "msplat/bands.hpp"
#include "msplat/common.hpp"

namespace msplat {

// Real spherical harmonics constants, degree 3.
constexpr double kSH0 = 0.28209479177387814;
constexpr double kSH1 = 0.4886025119029199;
constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                            -1.0925484305920792, 0.5462742152960396};
constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                            0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Evaluates the 16 degree-3 basis functions at a unit direction.
inline void sh_basis_deg3(const Vec3& d, double* basis) {
    double x = d.x, y = d.y, z = d.z;
    double xx = x * x, yy = y * y, zz = z * z;
    basis[0] = kSH0;
    basis[1] = -kSH1 * y;
    basis[2] = kSH1 * z;
    basis[3] = -kSH1 * x;
    basis[4] = kSH2[0] * x * y;
    basis[5] = kSH2[1] * y * z;
    basis[6] = kSH2[2] * (2.0 * zz - xx - yy);
    basis[7] = kSH2[3] * x * z;
    basis[8] = kSH2[4] * (xx - yy);
    basis[9] = kSH3[0] * y * (3.0 * xx - yy);
    basis[10] = kSH3[1] * x * y * z;
    basis[11] = kSH3[2] * y * (4.0 * zz - xx - yy);
    basis[12] = kSH3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    basis[13] = kSH3[4] * x * (4.0 * zz - xx - yy);
    basis[14] = kSH3[5] * z * (xx - yy);
    basis[15] = kSH3[6] * x * (xx - 3.0 * yy);
}

/// Baseline appearance model: each primitive carries separate SH coefficients
/// for every channel of every band. Coefficients are laid out per primitive
/// as [channel][coeff], so one band's channels form a contiguous block that
/// can be read and optimized in isolation.
struct SHColorModel {
    int degree = 3;
    int total_channels = 0;
    std::vector<double> coeffs;  // S x total_channels x coeff_count

    int coeff_count() const { return sh_coeff_count(degree); }
    size_t floats_per_primitive() const {
        return static_cast<size_t>(total_channels) * coeff_count();
    }
    size_t count() const {
        size_t fpp = floats_per_primitive();
        return fpp == 0 ? 0 : coeffs.size() / fpp;
    }

    static SHColorModel zeros(size_t s, int degree, int total_channels) {
        SHColorModel m;
        m.degree = degree;
        m.total_channels = total_channels;
        m.coeffs.assign(s * static_cast<size_t>(total_channels) * sh_coeff_count(degree), 0.0);
        return m;
    }
};

/// Evaluates one band's channels for N primitives given per-primitive unit
/// view directions: clamp(sum_k coeff_k * basis_k + 0.5, >= 0). Only the
/// requested band's coefficient block is read.
inline std::vector<double> sh_eval(const SHColorModel& model, const std::vector<Vec3>& directions,
                                   const SpectralBandSet& bands, int band_index) {
    require(model.degree == 3, ErrorClass::dimension_mismatch, "only degree-3 SH supported");
    int off = bands.channel_offset(band_index);
    int cc = bands[band_index].channel_count;
    size_t n = directions.size();
    size_t fpp = model.floats_per_primitive();
    std::vector<double> out(n * static_cast<size_t>(cc));
    int nc = model.coeff_count();
    for (size_t i = 0; i < n; ++i) {
        double basis[16];
        sh_basis_deg3(directions[i].normalized(), basis);
        for (int c = 0; c < cc; ++c) {
            const double* coeff = model.coeffs.data() + i * fpp + static_cast<size_t>(off + c) * nc;
            double v = 0.5;
            for (int k = 0; k < nc; ++k) v += coeff[k] * basis[k];
            out[i * cc + c] = std::max(0.0, v);
        }
    }
    return out;
}

/// Gradient of sh_eval with respect to the evaluated band's coefficients.
/// Accumulates into d_coeffs (same layout as model.coeffs).
inline void sh_backward(const SHColorModel& model, const std::vector<Vec3>& directions,
                        const SpectralBandSet& bands, int band_index,
                        const std::vector<double>& values, const std::vector<double>& d_values,
                        std::vector<double>& d_coeffs) {
    int off = bands.channel_offset(band_index);
    int cc = bands[band_index].channel_count;
    size_t n = directions.size();
    size_t fpp = model.floats_per_primitive();
    if (d_coeffs.size() != model.coeffs.size()) d_coeffs.assign(model.coeffs.size(), 0.0);
    int nc = model.coeff_count();
    for (size_t i = 0; i < n; ++i) {
        double basis[16];
        sh_basis_deg3(directions[i].normalized(), basis);
        for (int c = 0; c < cc; ++c) {
            // The clamp at zero gates the gradient.
            if (values[i * cc + c] <= 0.0) continue;
            double g = d_values[i * cc + c];
            double* dst = d_coeffs.data() + i * fpp + static_cast<size_t>(off + c) * nc;
            for (int k = 0; k < nc; ++k) dst[k] += g * basis[k];
        }
    }
}

}  // namespace msplat
