#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "msplat/bands.hpp"
#include "msplat/common.hpp"

namespace msplat {

/// Sparse reconstruction points used for initialization. Colors, when
/// present, come from cross-band feature tracks and are not trusted; nothing
/// downstream reads them.
struct SparsePoints {
    std::vector<Vec3> positions;
    std::vector<std::array<uint8_t, 3>> colors;  // optional, may be empty

    size_t count() const { return positions.size(); }
};

/// Structure-of-arrays Gaussian scene. Parameters live in their
/// optimization-friendly spaces:
///   - log_scales:     exponentiate to get strictly positive scales
///   - opacity_logits: logistic to get opacity in (0, 1)
///   - rotations:      raw quaternions (w, x, y, z), normalized at use
/// Feature vectors are flat S x d, row-major.
struct GaussianCloud {
    std::vector<double> positions;       // 3S
    std::vector<double> rotations;       // 4S
    std::vector<double> log_scales;      // 3S
    std::vector<double> opacity_logits;  // S
    std::vector<double> features;        // S*d
    int feature_dim = 0;

    size_t count() const { return opacity_logits.size(); }

    Vec3 position(size_t i) const {
        return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
    }
    Quat rotation(size_t i) const {
        return {rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2],
                rotations[4 * i + 3]};
    }
    Vec3 log_scale(size_t i) const {
        return {log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]};
    }
    double opacity(size_t i) const { return sigmoid(opacity_logits[i]); }
    Vec3 scale(size_t i) const {
        Vec3 ls = log_scale(i);
        return {std::exp(ls.x), std::exp(ls.y), std::exp(ls.z)};
    }
    const double* feature(size_t i) const { return features.data() + feature_dim * i; }
    double* feature(size_t i) { return features.data() + feature_dim * i; }

    void check_consistent() const {
        size_t s = count();
        require(positions.size() == 3 * s && rotations.size() == 4 * s &&
                    log_scales.size() == 3 * s &&
                    features.size() == static_cast<size_t>(feature_dim) * s,
                ErrorClass::shape_mismatch, "cloud arrays disagree on primitive count");
    }
};

/// World covariance of one primitive: R * diag(exp(log_scale))^2 * R^T.
/// Symmetric by construction; throws on a zero quaternion.
inline Mat3 covariance_of(const Quat& rotation, const Vec3& log_scale) {
    Mat3 r = rotation_from_quat(rotation);
    Vec3 s{std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
    Mat3 rs = r * Mat3::diag(s.x, s.y, s.z);
    Mat3 cov = rs * rs.transposed();
    // Re-symmetrize to kill last-bit drift from the two multiplies.
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            double v = 0.5 * (cov.m[i][j] + cov.m[j][i]);
            cov.m[i][j] = cov.m[j][i] = v;
        }
    return cov;
}

/// Exact brute-force kNN: mean distance from each point to its k nearest
/// neighbors (excluding itself). Rows are independent and run in parallel.
inline std::vector<double> knn_mean_distances(const std::vector<Vec3>& points, int k) {
    size_t n = points.size();
    require(n >= static_cast<size_t>(k) + 1, ErrorClass::insufficient_points,
            "need at least k+1 points for kNN distances");
    std::vector<double> result(n, 0.0);
    parallel_for(n, [&](size_t i) {
        std::vector<double> d2;
        d2.reserve(n - 1);
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            Vec3 diff = points[i] - points[j];
            d2.push_back(diff.dot(diff));
        }
        std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
        double mean = 0.0;
        for (int t = 0; t < k; ++t) mean += std::sqrt(d2[static_cast<size_t>(t)]);
        result[i] = mean / k;
    });
    return result;
}

/// kNN index table (S x k), nearest first, ties by index. Used for the
/// feature cosine loss neighborhood graph.
inline std::vector<int> knn_indices(const std::vector<Vec3>& points, int k) {
    size_t n = points.size();
    require(n >= static_cast<size_t>(k) + 1, ErrorClass::insufficient_points,
            "need at least k+1 points for kNN graph");
    std::vector<int> table(n * static_cast<size_t>(k));
    parallel_for(n, [&](size_t i) {
        std::vector<std::pair<double, int>> d2;
        d2.reserve(n - 1);
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            Vec3 diff = points[i] - points[j];
            d2.emplace_back(diff.dot(diff), static_cast<int>(j));
        }
        std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
        for (int t = 0; t < k; ++t) table[i * k + t] = d2[static_cast<size_t>(t)].second;
    });
    return table;
}

constexpr double kInitialOpacity = 0.1;

/// Builds the initial cloud: positions from the sparse points, isotropic
/// scale from the log of the mean kNN distance, identity rotations, opacity
/// 0.1, and features drawn from N(0, 0.2^2) with the given seed.
inline GaussianCloud init_from_points(const SparsePoints& points, int feature_dim, int knn_k,
                                      uint64_t seed) {
    size_t s = points.count();
    require(s >= static_cast<size_t>(knn_k) + 1, ErrorClass::insufficient_points,
            "initialization needs at least knn_k+1 points");
    GaussianCloud cloud;
    cloud.feature_dim = feature_dim;
    cloud.positions.resize(3 * s);
    cloud.rotations.resize(4 * s);
    cloud.log_scales.resize(3 * s);
    cloud.opacity_logits.resize(s);
    cloud.features.resize(s * static_cast<size_t>(feature_dim));

    std::vector<double> d = knn_mean_distances(points.positions, knn_k);
    double opacity_logit = logit(kInitialOpacity);
    for (size_t i = 0; i < s; ++i) {
        cloud.positions[3 * i] = points.positions[i].x;
        cloud.positions[3 * i + 1] = points.positions[i].y;
        cloud.positions[3 * i + 2] = points.positions[i].z;
        cloud.rotations[4 * i] = 1.0;  // identity quaternion (w,x,y,z)
        double ls = std::log(std::max(d[i], 1e-12));
        cloud.log_scales[3 * i] = ls;
        cloud.log_scales[3 * i + 1] = ls;
        cloud.log_scales[3 * i + 2] = ls;
        cloud.opacity_logits[i] = opacity_logit;
    }
    Rng rng(seed);
    for (auto& f : cloud.features) f = rng.normal(0.0, 0.2);
    return cloud;
}

// ---------------------------------------------------------------------------
// Per-primitive payload arithmetic
// ---------------------------------------------------------------------------

enum class ColorModelKind : uint8_t { neural = 0, per_band_sh = 1 };

struct ColorModelSpec {
    ColorModelKind kind = ColorModelKind::neural;
    int feature_dim = 8;   // neural
    int sh_degree = 3;     // per-band SH
    int total_channels = 7;

    static ColorModelSpec neural_model(int d) { return {ColorModelKind::neural, d, 3, 0}; }
    static ColorModelSpec sh_model(int degree, const SpectralBandSet& bands) {
        return {ColorModelKind::per_band_sh, 0, degree, bands.total_channels()};
    }
};

/// Floats carried by one primitive: 11 geometry floats (3 position + 4
/// rotation + 3 scale + 1 opacity) plus the appearance payload. The neural
/// model stores d floats; per-band SH stores (degree+1)^2 per channel.
inline int payload_floats_per_primitive(const ColorModelSpec& model) {
    constexpr int geometry_base = 11;
    if (model.kind == ColorModelKind::neural) return geometry_base + model.feature_dim;
    int coeffs = (model.sh_degree + 1) * (model.sh_degree + 1);
    return geometry_base + coeffs * model.total_channels;
}

}  // namespace msplat
