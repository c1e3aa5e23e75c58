#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "msplat/common.hpp"

namespace msplat {

/// Spherical parametrization (theta, phi) of a direction vector:
/// theta = acos(z) in [0, pi], phi = atan2(y, x) in (-pi, pi].
/// Non-unit inputs are normalized; a zero vector is an error.
inline Vec2 direction_to_spherical(const Vec3& v) {
    double n = v.norm();
    require(n > 1e-12, ErrorClass::invalid_direction, "zero direction vector");
    Vec3 u = (std::fabs(n - 1.0) <= 1e-6) ? v : v * (1.0 / n);
    double z = std::clamp(u.z, -1.0, 1.0);
    return {std::acos(z), std::atan2(u.y, u.x)};
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
// ELU with alpha=1 is C1; the derivative is recoverable from the output.
inline double elu_grad_from_output(double a) { return a > 0.0 ? 1.0 : a + 1.0; }

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
};

/// Shared emittance decoder: maps (feature ⊕ spherical view direction) to B
/// band intensities. Affine layers with ELU activations, except the output
/// which is squashed by a logistic into [0, 1]. The decoder is not a field;
/// it never sees positions, so each primitive's color depends only on its
/// own feature vector and the view direction.
struct ColorDecoder {
    int feature_dim = 0;
    int hidden_width = 0;
    int hidden_layers = 0;  // hidden-to-hidden blocks between input and output affine
    int output_dim = 0;
    std::vector<DenseLayer> layers;

    int input_dim() const { return feature_dim + 2; }
    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.biases.size();
        return n;
    }
};

/// Kaiming-uniform initialization: weights in ±sqrt(6/fan_in), biases zero.
inline ColorDecoder init_decoder(int feature_dim, int hidden_width, int hidden_layers,
                                 int output_dim, uint64_t seed) {
    require(feature_dim > 0 && hidden_width > 0 && hidden_layers >= 0 && output_dim > 0,
            ErrorClass::dimension_mismatch, "decoder dimensions must be positive");
    ColorDecoder dec;
    dec.feature_dim = feature_dim;
    dec.hidden_width = hidden_width;
    dec.hidden_layers = hidden_layers;
    dec.output_dim = output_dim;

    std::vector<std::pair<int, int>> shapes;
    shapes.emplace_back(feature_dim + 2, hidden_width);
    for (int i = 0; i < hidden_layers; ++i) shapes.emplace_back(hidden_width, hidden_width);
    shapes.emplace_back(hidden_width, output_dim);

    Rng rng(seed);
    for (auto [in, out] : shapes) {
        DenseLayer layer;
        layer.in = in;
        layer.out = out;
        layer.weights.resize(static_cast<size_t>(in) * out);
        layer.biases.assign(static_cast<size_t>(out), 0.0);
        double bound = std::sqrt(6.0 / in);
        for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
        dec.layers.push_back(std::move(layer));
    }
    return dec;
}

/// Per-row activations kept for the backward pass. activations[0] is the
/// concatenated input; activations[k+1] is layer k's output.
struct DecodeCache {
    int n = 0;
    std::vector<std::vector<double>> activations;
};

/// Decodes N rows of (feature, direction) into N x B colors in [0, 1].
/// Rows are independent; batching and order do not affect values.
inline std::vector<double> decode_forward(const std::vector<double>& features,
                                          const std::vector<double>& directions, int n,
                                          const ColorDecoder& dec, DecodeCache* cache = nullptr) {
    int d = dec.feature_dim;
    require(features.size() == static_cast<size_t>(n) * d &&
                directions.size() == static_cast<size_t>(n) * 2,
            ErrorClass::dimension_mismatch, "decode input sizes disagree with row count");

    size_t num_layers = dec.layers.size();
    std::vector<std::vector<double>> acts(num_layers + 1);
    acts[0].resize(static_cast<size_t>(n) * dec.input_dim());
    for (int i = 0; i < n; ++i) {
        double* row = acts[0].data() + static_cast<size_t>(i) * dec.input_dim();
        for (int k = 0; k < d; ++k) row[k] = features[static_cast<size_t>(i) * d + k];
        row[d] = directions[2 * static_cast<size_t>(i)];
        row[d + 1] = directions[2 * static_cast<size_t>(i) + 1];
    }

    for (size_t l = 0; l < num_layers; ++l) {
        const DenseLayer& layer = dec.layers[l];
        bool last = (l + 1 == num_layers);
        acts[l + 1].resize(static_cast<size_t>(n) * layer.out);
        const std::vector<double>& in = acts[l];
        std::vector<double>& out = acts[l + 1];
        parallel_for(static_cast<size_t>(n), [&](size_t i) {
            const double* x = in.data() + i * layer.in;
            double* y = out.data() + i * layer.out;
            for (int o = 0; o < layer.out; ++o) {
                double z = layer.biases[static_cast<size_t>(o)];
                const double* w = layer.weights.data() + static_cast<size_t>(o) * layer.in;
                for (int k = 0; k < layer.in; ++k) z += w[k] * x[k];
                y[o] = last ? sigmoid(z) : elu(z);
            }
        });
    }

    std::vector<double> colors = acts[num_layers];
    if (cache) {
        cache->n = n;
        cache->activations = std::move(acts);
    }
    return colors;
}

struct DecoderGrads {
    std::vector<DenseLayer> layers;  // same shapes as the decoder, gradient values

    void zero_like(const ColorDecoder& dec) {
        layers.clear();
        for (const auto& l : dec.layers) {
            DenseLayer g;
            g.in = l.in;
            g.out = l.out;
            g.weights.assign(l.weights.size(), 0.0);
            g.biases.assign(l.biases.size(), 0.0);
            layers.push_back(std::move(g));
        }
    }
};

/// Reverse-mode gradients of the decode composition. Returns dL/dfeatures
/// and accumulates dL/dtheta into `grads` (rows reduced in index order, so
/// results are reproducible). The direction inputs are not trainable; their
/// gradient is dropped.
inline std::vector<double> decode_backward(const ColorDecoder& dec, const DecodeCache& cache,
                                           const std::vector<double>& d_colors,
                                           DecoderGrads& grads) {
    size_t num_layers = dec.layers.size();
    require(cache.activations.size() == num_layers + 1, ErrorClass::stale_cache,
            "cache does not match decoder");
    int n = cache.n;
    require(d_colors.size() == static_cast<size_t>(n) * dec.output_dim,
            ErrorClass::dimension_mismatch, "color gradient size mismatch");
    if (grads.layers.empty()) grads.zero_like(dec);

    // delta starts as dL/d(pre-activation) of the output layer.
    std::vector<double> delta(static_cast<size_t>(n) * dec.output_dim);
    const std::vector<double>& y = cache.activations[num_layers];
    for (size_t i = 0; i < delta.size(); ++i) delta[i] = d_colors[i] * y[i] * (1.0 - y[i]);

    std::vector<double> d_input;
    for (size_t l = num_layers; l-- > 0;) {
        const DenseLayer& layer = dec.layers[l];
        DenseLayer& g = grads.layers[l];
        const std::vector<double>& in = cache.activations[l];

        for (int i = 0; i < n; ++i) {
            const double* x = in.data() + static_cast<size_t>(i) * layer.in;
            const double* dz = delta.data() + static_cast<size_t>(i) * layer.out;
            for (int o = 0; o < layer.out; ++o) {
                double* gw = g.weights.data() + static_cast<size_t>(o) * layer.in;
                for (int k = 0; k < layer.in; ++k) gw[k] += dz[o] * x[k];
                g.biases[static_cast<size_t>(o)] += dz[o];
            }
        }

        d_input.assign(static_cast<size_t>(n) * layer.in, 0.0);
        parallel_for(static_cast<size_t>(n), [&](size_t i) {
            const double* dz = delta.data() + i * layer.out;
            double* dx = d_input.data() + i * layer.in;
            for (int o = 0; o < layer.out; ++o) {
                const double* w = layer.weights.data() + static_cast<size_t>(o) * layer.in;
                for (int k = 0; k < layer.in; ++k) dx[k] += dz[o] * w[k];
            }
        });

        if (l > 0) {
            // Chain through the previous layer's ELU.
            const std::vector<double>& a = cache.activations[l];
            delta.resize(d_input.size());
            for (size_t i = 0; i < d_input.size(); ++i)
                delta[i] = d_input[i] * elu_grad_from_output(a[i]);
        }
    }

    // d_input now holds dL/d(feature ⊕ direction); keep the feature part.
    int d = dec.feature_dim;
    std::vector<double> d_features(static_cast<size_t>(n) * d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k)
            d_features[static_cast<size_t>(i) * d + k] =
                d_input[static_cast<size_t>(i) * dec.input_dim() + k];
    return d_features;
}

}  // namespace msplat
