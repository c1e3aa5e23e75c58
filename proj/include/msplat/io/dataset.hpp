#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msplat/bands.hpp"
#include "msplat/camera.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"
#include "msplat/image.hpp"
#include "msplat/io/colmap.hpp"
#include "msplat/io/image_io.hpp"
#include "msplat/io/manifest.hpp"

namespace msplat {

/// On-disk layout:
///   root/sparse/cameras.txt, images.txt, points3D.txt
///   root/bands.toml
///   root/images_<bandname>/<image name>
struct Dataset {
    SpectralBandSet bands;
    std::vector<CameraView> views;
    std::vector<Image> images;  // aligned with views when loaded
    SparsePoints points;
};

/// Parses the sparse reconstruction and band manifest and decodes every
/// registered image. Views keep their source paths; the view's band comes
/// from its camera id through the manifest.
inline Dataset load_dataset(const std::string& root, bool load_images = true) {
    namespace fs = std::filesystem;
    Dataset ds;
    BandManifest manifest = read_band_manifest((fs::path(root) / "bands.toml").string());
    ds.bands = manifest.bands;

    auto cameras = read_colmap_cameras((fs::path(root) / "sparse" / "cameras.txt").string());
    auto images = read_colmap_images((fs::path(root) / "sparse" / "images.txt").string());
    ds.points = read_colmap_points((fs::path(root) / "sparse" / "points3D.txt").string());

    for (const auto& img : images) {
        auto cam_it = cameras.find(img.camera_id);
        require(cam_it != cameras.end(), ErrorClass::parse_error,
                "image '" + img.name + "' references unknown camera " +
                    std::to_string(img.camera_id));
        const ColmapCamera& cam = cam_it->second;
        int band = manifest.band_for_camera(img.camera_id);

        CameraView view;
        view.camera_id = img.camera_id;
        view.band_index = band;
        view.fx = cam.fx;
        view.fy = cam.fy;
        view.cx = cam.cx;
        view.cy = cam.cy;
        view.width = cam.width;
        view.height = cam.height;
        view.rotation = rotation_from_quat(img.q);
        view.translation = img.t;
        view.name = img.name;
        view.image_path =
            (fs::path(root) / ("images_" + ds.bands[band].name) / img.name).string();
        view.validate();
        ds.views.push_back(view);
    }

    if (load_images) {
        ds.images.resize(ds.views.size());
        for (size_t i = 0; i < ds.views.size(); ++i) {
            Image img = read_image(ds.views[i].image_path);
            int expect = ds.bands[ds.views[i].band_index].channel_count;
            require(img.channels == expect, ErrorClass::io_error,
                    "image '" + ds.views[i].image_path + "' has " +
                        std::to_string(img.channels) + " channels, band expects " +
                        std::to_string(expect));
            ds.images[i] = std::move(img);
        }
    }
    return ds;
}

struct TrainEvalSplit {
    std::vector<size_t> train;
    std::vector<size_t> eval;
};

/// Per band, every holdout_every-th image (indices 0, 10, 20, ... in stable
/// filename order) goes to evaluation. Deterministic across runs.
inline TrainEvalSplit split_train_eval(const std::vector<CameraView>& views,
                                       int holdout_every = 10) {
    require(holdout_every >= 2, ErrorClass::shape_mismatch, "holdout interval must be >= 2");
    TrainEvalSplit split;
    std::map<int, std::vector<size_t>> by_band;
    for (size_t i = 0; i < views.size(); ++i) by_band[views[i].band_index].push_back(i);
    for (auto& [band, idx] : by_band) {
        std::sort(idx.begin(), idx.end(),
                  [&](size_t a, size_t b) { return views[a].name < views[b].name; });
        for (size_t k = 0; k < idx.size(); ++k) {
            if (k % static_cast<size_t>(holdout_every) == 0)
                split.eval.push_back(idx[k]);
            else
                split.train.push_back(idx[k]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.eval.begin(), split.eval.end());
    return split;
}

/// Restricts a dataset to the named bands (band-set order preserved),
/// dropping other views and remapping band indices.
inline Dataset filter_bands(const Dataset& ds, const std::vector<std::string>& keep_names) {
    std::vector<int> keep;
    for (const auto& name : keep_names) keep.push_back(ds.bands.find_or_throw(name));
    std::sort(keep.begin(), keep.end());
    std::vector<int> remap(static_cast<size_t>(ds.bands.size()), -1);
    std::vector<BandDescriptor> descriptors;
    for (size_t k = 0; k < keep.size(); ++k) {
        remap[static_cast<size_t>(keep[k])] = static_cast<int>(k);
        descriptors.push_back(ds.bands[keep[k]]);
    }
    Dataset out;
    out.bands = SpectralBandSet(std::move(descriptors));
    out.points = ds.points;
    for (size_t i = 0; i < ds.views.size(); ++i) {
        int nb = remap[static_cast<size_t>(ds.views[i].band_index)];
        if (nb < 0) continue;
        CameraView v = ds.views[i];
        v.band_index = nb;
        out.views.push_back(v);
        if (!ds.images.empty()) out.images.push_back(ds.images[i]);
    }
    return out;
}

}  // namespace msplat
