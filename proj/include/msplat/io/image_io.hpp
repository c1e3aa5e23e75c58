#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <string>

#include "msplat/common.hpp"
#include "msplat/image.hpp"

namespace msplat {

/// Decodes PNG/TIFF/JPEG to float [0, 1]: 8-bit values divide by 255,
/// 16-bit by 65535. Three-channel images come back in RGB order;
/// single-channel stays single-channel.
inline Image read_image(const std::string& path) {
    cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
    require(!raw.empty(), ErrorClass::io_error, "cannot read image '" + path + "'");
    int channels = raw.channels();
    require(channels == 1 || channels == 3 || channels == 4, ErrorClass::io_error,
            "unsupported channel count in '" + path + "'");
    if (channels == 4) {
        cv::cvtColor(raw, raw, cv::COLOR_BGRA2BGR);
        channels = 3;
    }
    double scale;
    switch (raw.depth()) {
        case CV_8U: scale = 255.0; break;
        case CV_16U: scale = 65535.0; break;
        default:
            fail(ErrorClass::io_error, "unsupported bit depth in '" + path + "'");
    }
    Image img(raw.cols, raw.rows, channels);
    for (int y = 0; y < raw.rows; ++y)
        for (int x = 0; x < raw.cols; ++x) {
            if (channels == 1) {
                double v = raw.depth() == CV_8U ? raw.at<uint8_t>(y, x) : raw.at<uint16_t>(y, x);
                img.at(x, y, 0) = v / scale;
            } else {
                // OpenCV loads BGR.
                if (raw.depth() == CV_8U) {
                    auto px = raw.at<cv::Vec3b>(y, x);
                    img.at(x, y, 0) = px[2] / scale;
                    img.at(x, y, 1) = px[1] / scale;
                    img.at(x, y, 2) = px[0] / scale;
                } else {
                    auto px = raw.at<cv::Vec3w>(y, x);
                    img.at(x, y, 0) = px[2] / scale;
                    img.at(x, y, 1) = px[1] / scale;
                    img.at(x, y, 2) = px[0] / scale;
                }
            }
        }
    return img;
}

/// Quantizes [0, 1] to the full 16-bit range (round to nearest).
inline uint16_t quantize16(double v) {
    return static_cast<uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}
inline uint8_t quantize8(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Writes a 16-bit PNG or TIFF depending on the extension.
inline void write_image16(const Image& img, const std::string& path) {
    require(img.channels == 1 || img.channels == 3, ErrorClass::io_error,
            "can only write 1- or 3-channel images");
    cv::Mat m(img.height, img.width, img.channels == 1 ? CV_16UC1 : CV_16UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (img.channels == 1) {
                m.at<uint16_t>(y, x) = quantize16(img.at(x, y, 0));
            } else {
                m.at<cv::Vec3w>(y, x) = cv::Vec3w(quantize16(img.at(x, y, 2)),
                                                  quantize16(img.at(x, y, 1)),
                                                  quantize16(img.at(x, y, 0)));
            }
        }
    require(cv::imwrite(path, m), ErrorClass::io_error, "cannot write image '" + path + "'");
}

/// Writes an 8-bit PNG.
inline void write_image8(const Image& img, const std::string& path) {
    require(img.channels == 1 || img.channels == 3, ErrorClass::io_error,
            "can only write 1- or 3-channel images");
    cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (img.channels == 1) {
                m.at<uint8_t>(y, x) = quantize8(img.at(x, y, 0));
            } else {
                m.at<cv::Vec3b>(y, x) = cv::Vec3b(quantize8(img.at(x, y, 2)),
                                                  quantize8(img.at(x, y, 1)),
                                                  quantize8(img.at(x, y, 0)));
            }
        }
    require(cv::imwrite(path, m), ErrorClass::io_error, "cannot write image '" + path + "'");
}

/// The exact float image a 16-bit file round-trip produces.
inline Image quantized16(const Image& img) {
    Image out = img;
    for (auto& v : out.data) v = quantize16(v) / 65535.0;
    return out;
}

}  // namespace msplat
