#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "msplat/camera.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"

namespace msplat {

struct ColmapCamera {
    int camera_id = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
};

struct ColmapImage {
    int image_id = 0;
    Quat q;  // world-to-camera rotation
    Vec3 t;
    int camera_id = 0;
    std::string name;
};

namespace colmap_detail {

inline bool next_content_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos) continue;
        if (line[pos] == '#') continue;
        return true;
    }
    return false;
}

}  // namespace colmap_detail

/// cameras.txt rows: CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]. Accepts PINHOLE
/// (fx fy cx cy) and SIMPLE_PINHOLE (f cx cy); any other model is rejected
/// by name.
inline std::map<int, ColmapCamera> read_colmap_cameras(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorClass::io_error, "cannot open '" + path + "'");
    std::map<int, ColmapCamera> cameras;
    std::string line;
    while (colmap_detail::next_content_line(in, line)) {
        std::istringstream ss(line);
        ColmapCamera cam;
        std::string model;
        ss >> cam.camera_id >> model >> cam.width >> cam.height;
        require(!ss.fail(), ErrorClass::parse_error, "malformed camera row in '" + path + "'");
        if (model == "PINHOLE") {
            ss >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
        } else if (model == "SIMPLE_PINHOLE") {
            double f;
            ss >> f >> cam.cx >> cam.cy;
            cam.fx = cam.fy = f;
        } else {
            fail(ErrorClass::unsupported_camera_model, "camera model '" + model + "'");
        }
        require(!ss.fail(), ErrorClass::parse_error, "malformed camera params in '" + path + "'");
        cameras[cam.camera_id] = cam;
    }
    return cameras;
}

/// images.txt: two rows per image; the first is
/// IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME, the second lists 2D points
/// and may be empty.
inline std::vector<ColmapImage> read_colmap_images(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorClass::io_error, "cannot open '" + path + "'");
    std::vector<ColmapImage> images;
    std::string line;
    bool expect_points_row = false;
    while (std::getline(in, line)) {
        if (expect_points_row) {
            // The 2D-observation row follows unconditionally and may be
            // empty; consume it whatever it holds.
            expect_points_row = false;
            continue;
        }
        size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        std::istringstream ss(line);
        ColmapImage img;
        ss >> img.image_id >> img.q.w >> img.q.x >> img.q.y >> img.q.z >> img.t.x >> img.t.y >>
            img.t.z >> img.camera_id >> img.name;
        require(!ss.fail(), ErrorClass::parse_error, "malformed image row in '" + path + "'");
        images.push_back(img);
        expect_points_row = true;
    }
    return images;
}

/// points3D.txt rows: POINT3D_ID X Y Z R G B ERROR TRACK[]. Track entries
/// are ignored; colors are carried along but treated as untrusted.
inline SparsePoints read_colmap_points(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorClass::io_error, "cannot open '" + path + "'");
    SparsePoints points;
    std::string line;
    while (colmap_detail::next_content_line(in, line)) {
        std::istringstream ss(line);
        long long id;
        Vec3 p;
        int r, g, b;
        ss >> id >> p.x >> p.y >> p.z >> r >> g >> b;
        require(!ss.fail(), ErrorClass::parse_error, "malformed point row in '" + path + "'");
        points.positions.push_back(p);
        points.colors.push_back({static_cast<uint8_t>(r), static_cast<uint8_t>(g),
                                 static_cast<uint8_t>(b)});
    }
    return points;
}

// ---------------------------------------------------------------------------
// Writers (synthetic scene export)
// ---------------------------------------------------------------------------

inline void write_colmap_cameras(const std::string& path,
                                 const std::vector<ColmapCamera>& cameras) {
    std::ofstream out(path);
    require(out.good(), ErrorClass::io_error, "cannot write '" + path + "'");
    out << "# Camera list: CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    char buf[256];
    for (const auto& cam : cameras) {
        std::snprintf(buf, sizeof buf, "%d PINHOLE %d %d %.17g %.17g %.17g %.17g\n",
                      cam.camera_id, cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy);
        out << buf;
    }
}

inline void write_colmap_images(const std::string& path, const std::vector<ColmapImage>& images) {
    std::ofstream out(path);
    require(out.good(), ErrorClass::io_error, "cannot write '" + path + "'");
    out << "# Image list: IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
    char buf[512];
    for (const auto& img : images) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g %d %s\n",
                      img.image_id, img.q.w, img.q.x, img.q.y, img.q.z, img.t.x, img.t.y,
                      img.t.z, img.camera_id, img.name.c_str());
        out << buf << "\n";  // empty 2D-point row
    }
}

inline void write_colmap_points(const std::string& path, const SparsePoints& points) {
    std::ofstream out(path);
    require(out.good(), ErrorClass::io_error, "cannot write '" + path + "'");
    out << "# 3D point list: POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n";
    char buf[256];
    for (size_t i = 0; i < points.positions.size(); ++i) {
        int r = 128, g = 128, b = 128;
        if (i < points.colors.size()) {
            r = points.colors[i][0];
            g = points.colors[i][1];
            b = points.colors[i][2];
        }
        std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g %d %d %d 0\n", i + 1,
                      points.positions[i].x, points.positions[i].y, points.positions[i].z, r, g,
                      b);
        out << buf;
    }
}

}  // namespace msplat
