#pragma once

#include <cmath>
#include <vector>

#include "msplat/camera.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"

namespace msplat {

constexpr double kNearClip = 0.01;
constexpr double kCovDilation = 0.3;  // px^2 added to the 2D covariance diagonal

/// Screen-space footprint of every primitive for one view. conic holds the
/// upper triangle (a, b, c) of the inverse 2D covariance; cam_point and
/// cov2d are kept for the backward pass.
struct Projected2D {
    std::vector<Vec2> mean2d;
    std::vector<double> conic;  // 3N: a, b, c with exponent a*dx^2 + 2b*dx*dy + c*dy^2
    std::vector<double> depth;
    std::vector<double> radius;
    std::vector<uint8_t> visible;
    std::vector<Vec3> cam_point;
    std::vector<double> cov2d;  // 3N: upper triangle before inversion (dilation included)

    size_t count() const { return visible.size(); }
};

namespace detail {

// 2D covariance = J W Sigma W^T J^T with the first-order projection
// Jacobian J evaluated at the (fov-clamped) camera-space point.
inline void cov2d_from_cam(const Vec3& t, double fx, double fy, double tan_fovx, double tan_fovy,
                           const Mat3& w, const Mat3& sigma, double out[3]) {
    double limx = 1.3 * tan_fovx, limy = 1.3 * tan_fovy;
    double txtz = std::clamp(t.x / t.z, -limx, limx);
    double tytz = std::clamp(t.y / t.z, -limy, limy);
    double tx = txtz * t.z, ty = tytz * t.z, tz = t.z;

    // J is 2x3: [fx/tz, 0, -fx*tx/tz^2; 0, fy/tz, -fy*ty/tz^2]
    double j00 = fx / tz, j02 = -fx * tx / (tz * tz);
    double j11 = fy / tz, j12 = -fy * ty / (tz * tz);

    Mat3 m = w * sigma * w.transposed();
    // C = J M J^T, expanded over the sparse J.
    double a = j00 * (j00 * m.m[0][0] + j02 * m.m[2][0]) + j02 * (j00 * m.m[0][2] + j02 * m.m[2][2]);
    double b = j00 * (j11 * m.m[0][1] + j12 * m.m[0][2]) + j02 * (j11 * m.m[2][1] + j12 * m.m[2][2]);
    double c = j11 * (j11 * m.m[1][1] + j12 * m.m[2][1]) + j12 * (j11 * m.m[1][2] + j12 * m.m[2][2]);
    out[0] = a + kCovDilation;
    out[1] = b;
    out[2] = c + kCovDilation;
}

}  // namespace detail

/// Projects the cloud into one view: camera transform, pinhole projection,
/// covariance linearization and dilation, visibility culling. Primitives
/// behind the near plane or whose footprint misses the image are marked
/// invisible rather than failing.
inline Projected2D project(const GaussianCloud& cloud, const CameraView& view) {
    size_t s = cloud.count();
    Projected2D p;
    p.mean2d.resize(s);
    p.conic.assign(3 * s, 0.0);
    p.depth.assign(s, 0.0);
    p.radius.assign(s, 0.0);
    p.visible.assign(s, 0);
    p.cam_point.resize(s);
    p.cov2d.assign(3 * s, 0.0);

    double tan_fovx = 0.5 * view.width / view.fx;
    double tan_fovy = 0.5 * view.height / view.fy;

    parallel_for(s, [&](size_t i) {
        Vec3 t = view.world_to_camera(cloud.position(i));
        p.cam_point[i] = t;
        p.depth[i] = t.z;
        if (t.z <= kNearClip) return;

        Vec2 mean{view.fx * t.x / t.z + view.cx, view.fy * t.y / t.z + view.cy};
        p.mean2d[i] = mean;

        Mat3 sigma = covariance_of(cloud.rotation(i), cloud.log_scale(i));
        double cov[3];
        detail::cov2d_from_cam(t, view.fx, view.fy, tan_fovx, tan_fovy, view.rotation, sigma, cov);
        p.cov2d[3 * i] = cov[0];
        p.cov2d[3 * i + 1] = cov[1];
        p.cov2d[3 * i + 2] = cov[2];

        double det = cov[0] * cov[2] - cov[1] * cov[1];
        if (det <= 0.0) return;
        p.conic[3 * i] = cov[2] / det;
        p.conic[3 * i + 1] = -cov[1] / det;
        p.conic[3 * i + 2] = cov[0] / det;

        double mid = 0.5 * (cov[0] + cov[2]);
        double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        double radius = std::ceil(3.0 * std::sqrt(lambda_max));
        p.radius[i] = radius;

        bool on_image = mean.x + radius > 0.0 && mean.x - radius < view.width &&
                        mean.y + radius > 0.0 && mean.y - radius < view.height;
        p.visible[i] = on_image ? 1 : 0;
    });
    return p;
}

/// Gradients of the projection chain, per primitive.
struct ProjectionGrads {
    std::vector<double> d_position;   // 3S
    std::vector<double> d_rotation;   // 4S (raw quaternion)
    std::vector<double> d_log_scale;  // 3S
};

/// Pulls screen-space gradients (d_mean2d, d_conic) back to the 3D
/// parameters: position, raw quaternion, log scale. Invisible primitives
/// contribute nothing.
inline ProjectionGrads project_backward(const GaussianCloud& cloud, const CameraView& view,
                                        const Projected2D& p, const std::vector<Vec2>& d_mean2d,
                                        const std::vector<double>& d_conic) {
    size_t s = cloud.count();
    require(d_mean2d.size() == s && d_conic.size() == 3 * s, ErrorClass::shape_mismatch,
            "projection gradient sizes disagree with cloud");
    ProjectionGrads g;
    g.d_position.assign(3 * s, 0.0);
    g.d_rotation.assign(4 * s, 0.0);
    g.d_log_scale.assign(3 * s, 0.0);

    double tan_fovx = 0.5 * view.width / view.fx;
    double tan_fovy = 0.5 * view.height / view.fy;
    double limx = 1.3 * tan_fovx, limy = 1.3 * tan_fovy;
    const Mat3& w = view.rotation;

    parallel_for(s, [&](size_t i) {
        if (!p.visible[i]) return;
        const Vec3& t = p.cam_point[i];
        double tz = t.z, tz2 = tz * tz;

        // dL/dcov2d from dL/dconic. conic = inv(cov); for the symmetric 2x2
        // dL/dCov = -inv * dL/dConic * inv, with the packed (a, b, c)
        // triple treated as the full symmetric matrix.
        double ia = p.conic[3 * i], ib = p.conic[3 * i + 1], ic = p.conic[3 * i + 2];
        double da = d_conic[3 * i], db = d_conic[3 * i + 1], dc = d_conic[3 * i + 2];
        // The conic gradient is reported against the packed triple where the
        // exponent is a*dx^2 + 2b*dxdy + c*dy^2, so db aggregates both
        // off-diagonal entries and enters the matrix form at half weight.
        double g00 = da, g01 = 0.5 * db, g11 = dc;
        // dCov = -Inv * G * Inv (all symmetric 2x2)
        double t00 = ia * g00 + ib * g01, t01 = ia * g01 + ib * g11;
        double t10 = ib * g00 + ic * g01, t11 = ib * g01 + ic * g11;
        double dcov00 = -(t00 * ia + t01 * ib);
        double dcov01 = -(t00 * ib + t01 * ic);
        double dcov11 = -(t10 * ib + t11 * ic);
        // symmetrize: packed dL/d(cov a, b, c); b slot again collects both
        // off-diagonal entries.
        double dCa = dcov00, dCb = 2.0 * dcov01, dCc = dcov11;

        // Recompute J at the clamped point.
        double txtz_raw = t.x / tz, tytz_raw = t.y / tz;
        bool clx = txtz_raw < -limx || txtz_raw > limx;
        bool cly = tytz_raw < -limy || tytz_raw > limy;
        double txc = std::clamp(txtz_raw, -limx, limx) * tz;
        double tyc = std::clamp(tytz_raw, -limy, limy) * tz;
        double fx = view.fx, fy = view.fy;
        double j00 = fx / tz, j02 = -fx * txc / tz2;
        double j11 = fy / tz, j12 = -fy * tyc / tz2;

        Mat3 sigma = covariance_of(cloud.rotation(i), cloud.log_scale(i));
        Mat3 m = w * sigma * w.transposed();

        // C = J M J^T. dL/dM = J^T dCov J with dCov symmetric.
        // J rows: r0 = (j00, 0, j02), r1 = (0, j11, j12).
        double r0[3] = {j00, 0.0, j02};
        double r1[3] = {0.0, j11, j12};
        Mat3 dm;
        for (int a2 = 0; a2 < 3; ++a2)
            for (int b2 = 0; b2 < 3; ++b2)
                dm.m[a2][b2] = dCa * r0[a2] * r0[b2] + 0.5 * dCb * (r0[a2] * r1[b2] + r1[a2] * r0[b2]) +
                               dCc * r1[a2] * r1[b2];

        // dL/dSigma = W^T dM W
        Mat3 dsigma = w.transposed() * dm * w;

        // dL/dJ = 2 * dCov_sym * J * M (dCov as matrix [dCa, dCb/2; dCb/2, dCc])
        double s00 = dCa, s01 = 0.5 * dCb, s11 = dCc;
        // (J*M) rows
        double jm0[3], jm1[3];
        for (int k = 0; k < 3; ++k) {
            jm0[k] = r0[0] * m.m[0][k] + r0[1] * m.m[1][k] + r0[2] * m.m[2][k];
            jm1[k] = r1[0] * m.m[0][k] + r1[1] * m.m[1][k] + r1[2] * m.m[2][k];
        }
        double dj00 = 2.0 * (s00 * jm0[0] + s01 * jm1[0]);
        double dj02 = 2.0 * (s00 * jm0[2] + s01 * jm1[2]);
        double dj11 = 2.0 * (s01 * jm0[1] + s11 * jm1[1]);
        double dj12 = 2.0 * (s01 * jm0[2] + s11 * jm1[2]);

        // J entries as functions of the camera point (with clamp gates):
        // j00 = fx/tz, j02 = -fx*txc/tz^2, and symmetric for y.
        double dtx = clx ? 0.0 : dj02 * (-fx / tz2);
        double dty = cly ? 0.0 : dj12 * (-fy / tz2);
        double dtz = dj00 * (-fx / tz2) + dj11 * (-fy / tz2) +
                     dj02 * (2.0 * fx * txc / (tz2 * tz)) + dj12 * (2.0 * fy * tyc / (tz2 * tz));
        if (clx) dtz += dj02 * (-fx / tz2) * (txc / tz);  // txc = ±limx * tz
        if (cly) dtz += dj12 * (-fy / tz2) * (tyc / tz);

        // Projection of the mean: px = fx*tx/tz + cx.
        const Vec2& dmean = d_mean2d[i];
        dtx += dmean.x * (fx / tz);
        dty += dmean.y * (fy / tz);
        dtz += -dmean.x * fx * t.x / tz2 - dmean.y * fy * t.y / tz2;

        // Camera point back to world position: t = W p + tr.
        Vec3 dcam{dtx, dty, dtz};
        Vec3 dpos = w.transposed() * dcam;
        g.d_position[3 * i] = dpos.x;
        g.d_position[3 * i + 1] = dpos.y;
        g.d_position[3 * i + 2] = dpos.z;

        // Sigma = (R S)(R S)^T with S = diag(exp(log_scale)).
        Quat q = cloud.rotation(i);
        double qn = q.norm();
        Mat3 r = rotation_from_quat(q);
        Vec3 sc = cloud.scale(i);
        Mat3 rs = r * Mat3::diag(sc.x, sc.y, sc.z);
        // dL/dA = (dSigma + dSigma^T) A, A = R S; dsigma is already symmetric.
        Mat3 dA;
        for (int a2 = 0; a2 < 3; ++a2)
            for (int b2 = 0; b2 < 3; ++b2) {
                double v = 0.0;
                for (int k = 0; k < 3; ++k)
                    v += (dsigma.m[a2][k] + dsigma.m[k][a2]) * rs.m[k][b2];
                dA.m[a2][b2] = v;
            }
        // dL/ds_k = (R^T dA)_kk * 1, then chain exp: d/dlog_s = s * d/ds.
        for (int k = 0; k < 3; ++k) {
            double v = 0.0;
            for (int a2 = 0; a2 < 3; ++a2) v += r.m[a2][k] * dA.m[a2][k];
            double sk = k == 0 ? sc.x : (k == 1 ? sc.y : sc.z);
            g.d_log_scale[3 * i + k] = v * sk;
        }
        // dL/dR = dA S
        Mat3 dR;
        for (int a2 = 0; a2 < 3; ++a2) {
            dR.m[a2][0] = dA.m[a2][0] * sc.x;
            dR.m[a2][1] = dA.m[a2][1] * sc.y;
            dR.m[a2][2] = dA.m[a2][2] * sc.z;
        }
        // dR/d(unit quaternion), then through the normalization.
        double uw = q.w / qn, ux = q.x / qn, uy = q.y / qn, uz = q.z / qn;
        double dw = 0, dx = 0, dy = 0, dz = 0;
        auto add = [&](int a2, int b2, double cw, double cxx, double cyy, double czz) {
            double v = dR.m[a2][b2];
            dw += v * cw;
            dx += v * cxx;
            dy += v * cyy;
            dz += v * czz;
        };
        // Entry-wise derivatives of the rotation matrix w.r.t. (w,x,y,z).
        add(0, 0, 0, 0, -4 * uy, -4 * uz);
        add(0, 1, -2 * uz, 2 * uy, 2 * ux, -2 * uw);
        add(0, 2, 2 * uy, 2 * uz, 2 * uw, 2 * ux);
        add(1, 0, 2 * uz, 2 * uy, 2 * ux, 2 * uw);
        add(1, 1, 0, -4 * ux, 0, -4 * uz);
        add(1, 2, -2 * ux, -2 * uw, 2 * uz, 2 * uy);
        add(2, 0, -2 * uy, 2 * uz, -2 * uw, 2 * ux);
        add(2, 1, 2 * ux, 2 * uw, 2 * uz, 2 * uy);
        add(2, 2, 0, -4 * ux, -4 * uy, 0);
        // Normalization Jacobian: d(unit)/d(raw) = (I - u u^T) / |q|.
        double dot = dw * uw + dx * ux + dy * uy + dz * uz;
        g.d_rotation[4 * i] = (dw - dot * uw) / qn;
        g.d_rotation[4 * i + 1] = (dx - dot * ux) / qn;
        g.d_rotation[4 * i + 2] = (dy - dot * uy) / qn;
        g.d_rotation[4 * i + 3] = (dz - dot * uz) / qn;
    });
    return g;
}

}  // namespace msplat
