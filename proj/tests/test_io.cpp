#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "msplat/msplat.hpp"

using namespace msplat;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("msplat_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

Checkpoint random_checkpoint(uint64_t seed) {
    Rng rng(seed);
    Checkpoint ckpt;
    ckpt.bands = default_band_set();
    ckpt.cloud.feature_dim = 8;
    for (int i = 0; i < 20; ++i) {
        ckpt.cloud.positions.insert(ckpt.cloud.positions.end(),
                                    {rng.normal(), rng.normal(), rng.normal()});
        ckpt.cloud.rotations.insert(ckpt.cloud.rotations.end(),
                                    {rng.normal(), rng.normal(), rng.normal(), rng.normal()});
        ckpt.cloud.log_scales.insert(ckpt.cloud.log_scales.end(),
                                     {rng.normal(), rng.normal(), rng.normal()});
        ckpt.cloud.opacity_logits.push_back(rng.normal());
        for (int k = 0; k < 8; ++k) ckpt.cloud.features.push_back(rng.normal());
    }
    ckpt.decoder = init_decoder(8, 32, 1, ckpt.bands.total_channels(), seed);
    ckpt.iteration = 1234;
    ckpt.config.seed = seed;
    return ckpt;
}

}  // namespace

TEST_CASE("colmap cameras parsing") {
    fs::path dir = temp_dir("cameras");
    SECTION("pinhole field order") {
        write_file(dir / "cameras.txt",
                   "# comment line\n"
                   "1 PINHOLE 64 64 100 100 32 32\n"
                   "2 SIMPLE_PINHOLE 32 24 50 16 12\n");
        auto cams = read_colmap_cameras((dir / "cameras.txt").string());
        REQUIRE(cams.size() == 2);
        CHECK(cams[1].fx == 100);
        CHECK(cams[1].fy == 100);
        CHECK(cams[1].cx == 32);
        CHECK(cams[1].cy == 32);
        CHECK(cams[1].width == 64);
        CHECK(cams[2].fx == 50);
        CHECK(cams[2].fy == 50);
        CHECK(cams[2].cx == 16);
    }
    SECTION("unknown model is rejected by name") {
        write_file(dir / "cameras.txt", "1 OPENCV 64 64 1 1 1 1 0 0 0 0\n");
        try {
            read_colmap_cameras((dir / "cameras.txt").string());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::unsupported_camera_model);
            CHECK(std::string(e.what()).find("OPENCV") != std::string::npos);
        }
    }
}

TEST_CASE("colmap images parsing") {
    fs::path dir = temp_dir("images");
    write_file(dir / "images.txt",
               "# two-line records\n"
               "1 1 0 0 0 0.5 -0.25 2 3 img_a.png\n"
               "\n"
               "2 0.7071067811865476 0 0 0.7071067811865476 0 0 1 3 img_b.png\n"
               "1 2 3 4\n");
    auto images = read_colmap_images((dir / "images.txt").string());
    REQUIRE(images.size() == 2);
    CHECK(images[0].name == "img_a.png");
    CHECK(images[0].camera_id == 3);
    CHECK(images[0].t.x == 0.5);
    // identity quaternion gives the identity rotation
    Mat3 r = rotation_from_quat(images[0].q);
    CHECK(r.m[0][0] == Catch::Approx(1.0));
    CHECK(r.m[0][1] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("colmap points parsing ignores tracks and keeps colors untrusted") {
    fs::path dir = temp_dir("points");
    write_file(dir / "points3D.txt",
               "# POINT3D_ID X Y Z R G B ERROR TRACK\n"
               "7 1.0 2.0 3.0 200 100 50 0.5 1 0 2 1\n"
               "9 -1.0 0.5 0.25 0 0 0 0.1\n");
    SparsePoints pts = read_colmap_points((dir / "points3D.txt").string());
    REQUIRE(pts.count() == 2);
    CHECK(pts.positions[0].x == 1.0);
    CHECK(pts.positions[1].z == 0.25);
    CHECK(pts.colors[0][0] == 200);
}

TEST_CASE("train/eval split holds out every tenth image per band") {
    std::vector<CameraView> views;
    auto add_views = [&](int band, int count) {
        for (int i = 0; i < count; ++i) {
            CameraView v;
            v.band_index = band;
            char name[32];
            std::snprintf(name, sizeof name, "b%d_%03d.png", band, i);
            v.name = name;
            views.push_back(v);
        }
    };
    SECTION("20 images give eval indices 0 and 10") {
        add_views(0, 20);
        TrainEvalSplit split = split_train_eval(views);
        REQUIRE(split.eval.size() == 2);
        CHECK(views[split.eval[0]].name == "b0_000.png");
        CHECK(views[split.eval[1]].name == "b0_010.png");
        CHECK(split.train.size() == 18);
    }
    SECTION("9 images still hold one out") {
        add_views(0, 9);
        TrainEvalSplit split = split_train_eval(views);
        REQUIRE(split.eval.size() == 1);
        CHECK(views[split.eval[0]].name == "b0_000.png");
    }
    SECTION("split is per band and deterministic") {
        add_views(0, 12);
        add_views(1, 12);
        TrainEvalSplit a = split_train_eval(views);
        TrainEvalSplit b = split_train_eval(views);
        CHECK(a.eval == b.eval);
        CHECK(a.eval.size() == 4);  // indices 0 and 10 in each band
    }
}

TEST_CASE("checkpoint round trip") {
    fs::path dir = temp_dir("ckpt");
    Checkpoint ckpt = random_checkpoint(9);
    std::string path = (dir / "model.ckpt").string();
    save_checkpoint(ckpt, path);
    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.cloud.positions == ckpt.cloud.positions);
    CHECK(loaded.cloud.rotations == ckpt.cloud.rotations);
    CHECK(loaded.cloud.log_scales == ckpt.cloud.log_scales);
    CHECK(loaded.cloud.opacity_logits == ckpt.cloud.opacity_logits);
    CHECK(loaded.cloud.features == ckpt.cloud.features);
    CHECK(loaded.iteration == ckpt.iteration);
    CHECK(loaded.bands.size() == ckpt.bands.size());
    CHECK(loaded.bands[4].name == "NIR");
    for (size_t l = 0; l < ckpt.decoder.layers.size(); ++l) {
        CHECK(loaded.decoder.layers[l].weights == ckpt.decoder.layers[l].weights);
        CHECK(loaded.decoder.layers[l].biases == ckpt.decoder.layers[l].biases);
    }
    CHECK(loaded.config.seed == ckpt.config.seed);

    SECTION("byte-identical serialization") {
        CHECK(serialize_checkpoint(ckpt) == serialize_checkpoint(loaded));
    }
    SECTION("a corrupted byte fails the checksum") {
        std::vector<uint8_t> bytes = serialize_checkpoint(ckpt);
        bytes[bytes.size() / 2] ^= 0x40;
        try {
            deserialize_checkpoint(bytes);
            FAIL("expected checksum failure");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::checksum_mismatch);
        }
    }
    SECTION("a future version tag is refused without a partial load") {
        std::vector<uint8_t> bytes = serialize_checkpoint(ckpt);
        bytes[4] = 0xFF;  // version field, little-endian
        // fix up the trailing crc so only the version check can fire
        uint32_t crc = ckpt_detail::crc32(bytes.data(), bytes.size() - 4);
        for (int i = 0; i < 4; ++i)
            bytes[bytes.size() - 4 + static_cast<size_t>(i)] =
                static_cast<uint8_t>(crc >> (8 * i));
        try {
            deserialize_checkpoint(bytes);
            FAIL("expected version mismatch");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::version_mismatch);
        }
    }
    SECTION("truncation is detected") {
        std::vector<uint8_t> bytes = serialize_checkpoint(ckpt);
        bytes.resize(bytes.size() / 2);
        CHECK_THROWS_AS(deserialize_checkpoint(bytes), Error);
    }
    SECTION("sh-model checkpoints round trip too") {
        Checkpoint shc = ckpt;
        shc.color_model = ColorModelKind::per_band_sh;
        shc.decoder = ColorDecoder{};
        shc.sh = SHColorModel::zeros(ckpt.cloud.count(), 3, ckpt.bands.total_channels());
        Rng rng(4);
        for (auto& c : shc.sh.coeffs) c = rng.normal();
        std::string p2 = (dir / "sh.ckpt").string();
        save_checkpoint(shc, p2);
        Checkpoint back = load_checkpoint(p2);
        CHECK(back.color_model == ColorModelKind::per_band_sh);
        CHECK(back.sh.coeffs == shc.sh.coeffs);
    }
}

TEST_CASE("band manifest round trip and errors") {
    fs::path dir = temp_dir("manifest");
    SECTION("round trip") {
        SpectralBandSet bands = default_band_set();
        std::map<int, int> cam_to_band = {{1, 0}, {2, 1}, {3, 2}, {4, 3}, {5, 4}};
        write_band_manifest((dir / "bands.toml").string(), bands, cam_to_band);
        BandManifest m = read_band_manifest((dir / "bands.toml").string());
        CHECK(m.bands.size() == 5);
        CHECK(m.bands[0].name == "RGB");
        CHECK(m.bands[0].channel_count == 3);
        CHECK(m.bands[4].wavelength_nm.value() == 860.0);
        CHECK(m.band_for_camera(5) == 4);
        CHECK_THROWS_AS(m.band_for_camera(99), Error);
    }
    SECTION("duplicate camera mapping is refused") {
        write_file(dir / "bands.toml",
                   "[[band]]\nname = \"A\"\ncamera_id = 1\nchannels = 1\n"
                   "[[band]]\nname = \"B\"\ncamera_id = 1\nchannels = 1\n");
        CHECK_THROWS_AS(read_band_manifest((dir / "bands.toml").string()), Error);
    }
}

TEST_CASE("image files round trip through 16-bit quantization") {
    fs::path dir = temp_dir("imgio");
    Rng rng(12);
    Image img(20, 14, 3);
    for (auto& v : img.data) v = rng.uniform(0, 1);
    SECTION("png") {
        std::string path = (dir / "x.png").string();
        write_image16(img, path);
        Image back = read_image(path);
        REQUIRE(back.same_shape(img));
        Image expect = quantized16(img);
        CHECK(back.data == expect.data);
    }
    SECTION("tiff") {
        std::string path = (dir / "x.tif").string();
        write_image16(img, path);
        Image back = read_image(path);
        Image expect = quantized16(img);
        CHECK(back.data == expect.data);
    }
    SECTION("integer max decodes to exactly one") {
        Image ones(4, 4, 1, 1.0);
        std::string path = (dir / "ones.png").string();
        write_image16(ones, path);
        Image back = read_image(path);
        for (double v : back.data) CHECK(v == 1.0);
    }
}

TEST_CASE("synthetic scene generation") {
    fs::path dir = temp_dir("synth");
    SynthConfig cfg;
    cfg.seed = 1;
    cfg.n_gaussians = 40;
    cfg.views_per_band = 3;
    cfg.image_size = 32;
    Checkpoint gt = make_synthetic_scene(dir.string(), cfg);

    SECTION("dataset loads back with the declared bands") {
        Dataset ds = load_dataset(dir.string());
        CHECK(ds.bands.size() == 5);
        CHECK(ds.bands.total_channels() == 7);
        CHECK(ds.views.size() == 5u * 3u);
        CHECK(ds.points.count() == 40);
        for (size_t i = 0; i < ds.views.size(); ++i)
            CHECK(ds.images[i].channels == ds.bands[ds.views[i].band_index].channel_count);
    }
    SECTION("ground-truth checkpoint reproduces the stored images exactly") {
        Dataset ds = load_dataset(dir.string());
        ColorModel model;
        model.kind = gt.color_model;
        model.decoder = gt.decoder;
        for (size_t i = 0; i < ds.views.size(); ++i) {
            Image render = render_image(gt.cloud, model, ds.bands, ds.views[i].band_index,
                                        ds.views[i], 0.0);
            // Files hold the 16-bit quantization of the render.
            CHECK(std::isinf(psnr(quantized16(render), ds.images[i])));
        }
    }
    SECTION("same seed reproduces identical bytes") {
        fs::path dir2 = temp_dir("synth2");
        make_synthetic_scene(dir2.string(), cfg);
        for (const char* name : {"sparse/cameras.txt", "sparse/images.txt", "sparse/points3D.txt",
                                 "bands.toml", "images_NIR/view_001.png"}) {
            std::ifstream a(dir / name, std::ios::binary), b(dir2 / name, std::ios::binary);
            std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
            std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
            REQUIRE(!sa.empty());
            CHECK(sa == sb);
        }
    }
    SECTION("dataset band filter drops views and remaps indices") {
        Dataset ds = load_dataset(dir.string());
        Dataset sub = filter_bands(ds, {"RGB", "NIR"});
        CHECK(sub.bands.size() == 2);
        CHECK(sub.bands.total_channels() == 4);
        CHECK(sub.views.size() == 2u * 3u);
        for (const auto& v : sub.views) CHECK(v.band_index < 2);
    }
}
