#pragma once

#include <algorithm>
#include <cstring>
#include <vector>

#include "msplat/common.hpp"

namespace msplat {

/// Dense float image, row-major HWC, values nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    size_t value_count() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

inline void require_same_shape(const Image& a, const Image& b) {
    require(a.same_shape(b), ErrorClass::shape_mismatch, "image shapes differ");
}

/// Area-average downsample by an integer factor. Exact for divisible sizes;
/// trailing partial rows/columns average over the available pixels.
inline Image downsample_area(const Image& img, int factor) {
    if (factor <= 1) return img;
    int w = std::max(1, img.width / factor);
    int h = std::max(1, img.height / factor);
    Image out(w, h, img.channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int x0 = x * factor, y0 = y * factor;
            int x1 = std::min(img.width, x0 + factor);
            int y1 = std::min(img.height, y0 + factor);
            for (int c = 0; c < img.channels; ++c) {
                double sum = 0.0;
                for (int yy = y0; yy < y1; ++yy)
                    for (int xx = x0; xx < x1; ++xx) sum += img.at(xx, yy, c);
                out.at(x, y, c) = sum / ((x1 - x0) * (y1 - y0));
            }
        }
    }
    return out;
}

inline Image extract_channel(const Image& img, int c) {
    require(c >= 0 && c < img.channels, ErrorClass::index_out_of_range, "channel out of range");
    Image out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, y, 0) = img.at(x, y, c);
    return out;
}

inline double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

}  // namespace msplat
