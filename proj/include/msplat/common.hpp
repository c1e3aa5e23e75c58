#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace msplat {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Machine-parseable error classes. CLI maps these to exit codes; the
/// class name (kebab-case) is printed as a single-line error prefix.
enum class ErrorClass {
    invalid_rotation,
    insufficient_points,
    invalid_direction,
    dimension_mismatch,
    shape_mismatch,
    stale_cache,
    index_out_of_range,
    band_not_found,
    unsupported_camera_model,
    manifest_error,
    parse_error,
    io_error,
    version_mismatch,
    checksum_mismatch,
    truncated_file,
    undefined_spectrum,
    undefined_correlation,
    non_positive_sum,
    no_signal,
    numeric_failure,
};

inline const char* error_class_name(ErrorClass c) {
    switch (c) {
        case ErrorClass::invalid_rotation: return "invalid-rotation";
        case ErrorClass::insufficient_points: return "insufficient-points";
        case ErrorClass::invalid_direction: return "invalid-direction";
        case ErrorClass::dimension_mismatch: return "dimension-mismatch";
        case ErrorClass::shape_mismatch: return "shape-mismatch";
        case ErrorClass::stale_cache: return "stale-cache";
        case ErrorClass::index_out_of_range: return "index-out-of-range";
        case ErrorClass::band_not_found: return "band-not-found";
        case ErrorClass::unsupported_camera_model: return "unsupported-camera-model";
        case ErrorClass::manifest_error: return "manifest-error";
        case ErrorClass::parse_error: return "parse-error";
        case ErrorClass::io_error: return "io-error";
        case ErrorClass::version_mismatch: return "version-mismatch";
        case ErrorClass::checksum_mismatch: return "checksum-mismatch";
        case ErrorClass::truncated_file: return "truncated-file";
        case ErrorClass::undefined_spectrum: return "undefined-spectrum";
        case ErrorClass::undefined_correlation: return "undefined-correlation";
        case ErrorClass::non_positive_sum: return "non-positive-sum";
        case ErrorClass::no_signal: return "no-signal";
        case ErrorClass::numeric_failure: return "numeric-failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& msg)
        : std::runtime_error(std::string(error_class_name(cls)) + ": " + msg), cls_(cls) {}
    ErrorClass error_class() const { return cls_; }

private:
    ErrorClass cls_;
};

[[noreturn]] inline void fail(ErrorClass cls, const std::string& msg) { throw Error(cls, msg); }

inline void require(bool cond, ErrorClass cls, const std::string& msg) {
    if (!cond) fail(cls, msg);
}

// ---------------------------------------------------------------------------
// Small vector / matrix types
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

/// Quaternion, scalar-first (w, x, y, z). Stored values may drift off unit
/// norm during optimization; every consumer normalizes at use.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

/// Row-major 3x3 matrix.
struct Mat3 {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    static Mat3 identity() {
        Mat3 r;
        r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
        return r;
    }
    static Mat3 diag(double a, double b, double c) {
        Mat3 r;
        r.m[0][0] = a;
        r.m[1][1] = b;
        r.m[2][2] = c;
        return r;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        return r;
    }
    double det() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
    double trace() const { return m[0][0] + m[1][1] + m[2][2]; }
};

/// Rotation matrix from a quaternion; normalizes internally.
/// Throws invalid-rotation on a (near-)zero quaternion.
inline Mat3 rotation_from_quat(const Quat& q) {
    double n = q.norm();
    require(n > 1e-12, ErrorClass::invalid_rotation, "zero quaternion");
    double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    Mat3 r;
    r.m[0][0] = 1 - 2 * (y * y + z * z);
    r.m[0][1] = 2 * (x * y - w * z);
    r.m[0][2] = 2 * (x * z + w * y);
    r.m[1][0] = 2 * (x * y + w * z);
    r.m[1][1] = 1 - 2 * (x * x + z * z);
    r.m[1][2] = 2 * (y * z - w * x);
    r.m[2][0] = 2 * (x * z - w * y);
    r.m[2][1] = 2 * (y * z + w * x);
    r.m[2][2] = 1 - 2 * (x * x + y * y);
    return r;
}

/// Quaternion (w, x, y, z) from a proper rotation matrix.
inline Quat quat_from_rotation(const Mat3& r) {
    Quat q;
    double tr = r.trace();
    if (tr > 0.0) {
        double s = std::sqrt(tr + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (r.m[2][1] - r.m[1][2]) / s;
        q.y = (r.m[0][2] - r.m[2][0]) / s;
        q.z = (r.m[1][0] - r.m[0][1]) / s;
    } else if (r.m[0][0] > r.m[1][1] && r.m[0][0] > r.m[2][2]) {
        double s = std::sqrt(1.0 + r.m[0][0] - r.m[1][1] - r.m[2][2]) * 2.0;
        q.w = (r.m[2][1] - r.m[1][2]) / s;
        q.x = 0.25 * s;
        q.y = (r.m[0][1] + r.m[1][0]) / s;
        q.z = (r.m[0][2] + r.m[2][0]) / s;
    } else if (r.m[1][1] > r.m[2][2]) {
        double s = std::sqrt(1.0 + r.m[1][1] - r.m[0][0] - r.m[2][2]) * 2.0;
        q.w = (r.m[0][2] - r.m[2][0]) / s;
        q.x = (r.m[0][1] + r.m[1][0]) / s;
        q.y = 0.25 * s;
        q.z = (r.m[1][2] + r.m[2][1]) / s;
    } else {
        double s = std::sqrt(1.0 + r.m[2][2] - r.m[0][0] - r.m[1][1]) * 2.0;
        q.w = (r.m[1][0] - r.m[0][1]) / s;
        q.x = (r.m[0][2] + r.m[2][0]) / s;
        q.y = (r.m[1][2] + r.m[2][1]) / s;
        q.z = 0.25 * s;
    }
    return q;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

/// Seeded generator with self-contained distributions, so that streams are
/// bit-reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; consumes exactly two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // 53-bit uniform scaled; fine for n far below 2^53.
        return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Weighted categorical draw over non-negative weights.
    size_t pick_weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        require(total > 0.0, ErrorClass::numeric_failure, "non-positive total weight");
        double r = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Worker parallelism
// ---------------------------------------------------------------------------

inline std::atomic<int>& thread_count_storage() {
    static std::atomic<int> count{0};  // 0 = use hardware concurrency
    return count;
}

inline void set_thread_count(int n) { thread_count_storage().store(n > 0 ? n : 0); }

inline int thread_count() {
    int n = thread_count_storage().load();
    if (n > 0) return n;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
/// worker. Callers must ensure iterations write disjoint state; results are
/// then independent of the worker count.
template <typename Fn>
inline void parallel_for(size_t n, Fn&& fn) {
    int workers = thread_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t nw = std::min<size_t>(static_cast<size_t>(workers), n);
    size_t chunk = (n + nw - 1) / nw;
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (size_t t = 0; t < nw; ++t) {
        size_t lo = t * chunk;
        size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn]() {
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace msplat
