#pragma once

#include <cmath>
#include <string>

#include "msplat/common.hpp"

namespace msplat {

/// Pinhole camera for one image of one physical sensor. The pose maps world
/// points into the camera frame: p_cam = rotation * p_world + translation.
struct CameraView {
    int camera_id = 0;
    int band_index = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::identity();  // world-to-camera
    Vec3 translation{};
    std::string image_path;
    std::string name;

    void validate() const {
        require(fx > 0 && fy > 0, ErrorClass::shape_mismatch, "focal lengths must be positive");
        require(cx >= 0 && cx < width && cy >= 0 && cy < height, ErrorClass::shape_mismatch,
                "principal point outside image");
        Mat3 rtr = rotation.transposed() * rotation;
        double dev = 0.0;
        Mat3 eye = Mat3::identity();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) dev = std::max(dev, std::fabs(rtr.m[i][j] - eye.m[i][j]));
        require(dev < 1e-6 && rotation.det() > 0.0, ErrorClass::invalid_rotation,
                "pose rotation is not a proper rotation");
    }

    Vec3 camera_center() const {
        // c = -R^T t
        Vec3 rt = rotation.transposed() * translation;
        return {-rt.x, -rt.y, -rt.z};
    }

    Vec3 world_to_camera(const Vec3& p) const { return rotation * p + translation; }

    /// Scaled copy for coarse-to-fine rendering (factor in (0, 1]).
    CameraView scaled(double factor) const {
        CameraView v = *this;
        v.width = std::max(1, static_cast<int>(std::lround(width * factor)));
        v.height = std::max(1, static_cast<int>(std::lround(height * factor)));
        double sx = static_cast<double>(v.width) / width;
        double sy = static_cast<double>(v.height) / height;
        v.fx = fx * sx;
        v.fy = fy * sy;
        v.cx = cx * sx;
        v.cy = cy * sy;
        return v;
    }

    bool same_pose(const CameraView& o) const {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (rotation.m[i][j] != o.rotation.m[i][j]) return false;
        return translation.x == o.translation.x && translation.y == o.translation.y &&
               translation.z == o.translation.z;
    }
};

}  // namespace msplat
