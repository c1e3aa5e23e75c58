// Command-line entry points: train / render / eval / ndvi / register /
// synth / payload. Every failure exits non-zero with a single
// machine-parseable error line on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "msplat/msplat.hpp"

namespace fs = std::filesystem;
using namespace msplat;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(ErrorClass cls) {
    switch (cls) {
        case ErrorClass::numeric_failure:
        case ErrorClass::no_signal:
        case ErrorClass::undefined_spectrum:
        case ErrorClass::undefined_correlation:
        case ErrorClass::non_positive_sum:
            return kExitNumeric;
        default:
            return kExitData;
    }
}

ColorModel model_of(const Checkpoint& ckpt) {
    ColorModel m;
    m.kind = ckpt.color_model;
    m.decoder = ckpt.decoder;
    m.sh = ckpt.sh;
    return m;
}

/// Pose file: two content lines,
///   fx fy cx cy width height
///   qw qx qy qz tx ty tz
CameraView read_pose_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorClass::io_error, "cannot open pose file '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        lines.push_back(line);
    }
    require(lines.size() >= 2, ErrorClass::parse_error, "pose file needs two content lines");
    CameraView v;
    {
        std::istringstream ss(lines[0]);
        ss >> v.fx >> v.fy >> v.cx >> v.cy >> v.width >> v.height;
        require(!ss.fail(), ErrorClass::parse_error, "malformed intrinsics line in pose file");
    }
    {
        std::istringstream ss(lines[1]);
        Quat q;
        ss >> q.w >> q.x >> q.y >> q.z >> v.translation.x >> v.translation.y >> v.translation.z;
        require(!ss.fail(), ErrorClass::parse_error, "malformed pose line in pose file");
        v.rotation = rotation_from_quat(q);
    }
    v.validate();
    return v;
}

CameraView resolve_view(const std::string& view_arg, const std::string& data_dir) {
    bool numeric = !view_arg.empty() &&
                   view_arg.find_first_not_of("0123456789") == std::string::npos;
    if (!numeric) return read_pose_file(view_arg);
    require(!data_dir.empty(), ErrorClass::parse_error,
            "--view by index needs --data to supply the views");
    Dataset ds = load_dataset(data_dir, /*load_images=*/false);
    size_t index = std::stoul(view_arg);
    require(index < ds.views.size(), ErrorClass::index_out_of_range,
            "view index " + view_arg + " out of range (dataset has " +
                std::to_string(ds.views.size()) + ")");
    return ds.views[index];
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void print_eval_report(std::ostream& os, const EvalReport& report) {
    char buf[160];
    os << "band        PSNR      SSIM    views\n";
    for (const auto& b : report.per_band) {
        std::snprintf(buf, sizeof buf, "%-8s %8.3f  %8.4f  %5d\n", b.band.c_str(), b.psnr,
                      b.ssim, b.view_count);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "%-8s %8.3f  %8.4f\n", "mean", report.mean_psnr,
                  report.mean_ssim);
    os << buf;
    if (report.spectral_pixels > 0) {
        std::snprintf(buf, sizeof buf,
                      "All-MS   SAM=%.6f  SCM=%.6f  SID=%.6f  (pixels=%zu excluded=%zu)\n",
                      report.sam_mean, report.scm_mean, report.sid_mean, report.spectral_pixels,
                      report.excluded_pixels);
        os << buf;
    }
}

void write_eval_kv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    require(out.good(), ErrorClass::io_error, "cannot write '" + path + "'");
    for (const auto& b : report.per_band) {
        out << "psnr." << b.band << "=" << b.psnr << "\n";
        out << "ssim." << b.band << "=" << b.ssim << "\n";
    }
    out << "psnr.mean=" << report.mean_psnr << "\n";
    out << "ssim.mean=" << report.mean_ssim << "\n";
    out << "sam.all_ms=" << report.sam_mean << "\n";
    out << "scm.all_ms=" << report.scm_mean << "\n";
    out << "sid.all_ms=" << report.sid_mean << "\n";
    out << "spectral.pixels=" << report.spectral_pixels << "\n";
    out << "spectral.excluded=" << report.excluded_pixels << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-spectral gaussian splatting"};
    app.fallthrough();  // accept global flags after the subcommand name
    app.set_config("--config", "", "TOML-style config mirroring every flag; flags override it");
    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (0 = logical cores)");

    // --- train ---------------------------------------------------------
    auto* cmd_train = app.add_subcommand("train", "optimize a scene from a dataset");
    std::string train_data, train_out, train_bands, train_log, train_color = "neural";
    TrainConfig cfg;
    cmd_train->add_option("--data", train_data, "dataset root")->required();
    cmd_train->add_option("--out", train_out, "output checkpoint path")->required();
    cmd_train->add_option("--iters", cfg.iterations, "training iterations");
    cmd_train->add_option("--seed", cfg.seed, "rng seed");
    cmd_train->add_option("--bands", train_bands, "comma-separated band subset (default: all)");
    cmd_train->add_option("--color-model", train_color, "neural|sh");
    cmd_train->add_option("--feature-dim", cfg.feature_dim, "per-primitive feature size");
    cmd_train->add_option("--hidden", cfg.hidden_width, "decoder hidden width");
    cmd_train->add_option("--layers", cfg.hidden_layers, "decoder hidden layers");
    cmd_train->add_option("--lr", cfg.lr_feature, "feature/MLP learning rate");
    cmd_train->add_option("--warmup", cfg.warmup_iters, "warm-up iterations");
    cmd_train->add_option("--rgb-weight", cfg.rgb_sampling_weight, "RGB view sampling weight");
    cmd_train->add_option("--densify-interval", cfg.densify_interval, "densification interval");
    cmd_train->add_option("--tau-grad", cfg.tau_grad, "densification gradient threshold");
    cmd_train->add_option("--densify-start", cfg.densify_start, "densification window start");
    cmd_train->add_option("--densify-stop", cfg.densify_stop,
                          "densification window stop (-1 = 60% of iterations)");
    cmd_train->add_option("--lambda", cfg.weights.lambda, "D-SSIM mix weight");
    cmd_train->add_option("--lambda-norm", cfg.weights.lambda_norm, "feature norm weight");
    cmd_train->add_option("--lambda-smooth", cfg.weights.lambda_smooth, "smoothness weight");
    cmd_train->add_option("--lambda-cos", cfg.weights.lambda_cos, "cosine kNN weight");
    cmd_train->add_option("--background", cfg.background, "per-band background value");
    cmd_train->add_option("--eval-interval", cfg.eval_interval, "held-out eval cadence");
    cmd_train->add_option("--log", train_log, "metrics log path (default <out>.log)");
    cmd_train->add_flag("--interleave", cfg.deterministic_interleave,
                        "fixed 4-MS-then-RGB view cycle instead of weighted sampling");
    cmd_train->add_flag("--no-opacity-reset",
                        [&cfg](int64_t) { cfg.opacity_reset_enabled = false; },
                        "disable periodic opacity resets");

    // --- render --------------------------------------------------------
    auto* cmd_render = app.add_subcommand("render", "render one band of one view");
    std::string render_ckpt, render_view_arg, render_band, render_out, render_data;
    cmd_render->add_option("--ckpt", render_ckpt, "checkpoint")->required();
    cmd_render->add_option("--view", render_view_arg, "view index (with --data) or pose file")
        ->required();
    cmd_render->add_option("--band", render_band, "band name")->required();
    cmd_render->add_option("--out", render_out, "output image (16-bit png/tif)")->required();
    cmd_render->add_option("--data", render_data, "dataset root for --view by index");

    // --- eval ----------------------------------------------------------
    auto* cmd_eval = app.add_subcommand("eval", "score a checkpoint on the held-out split");
    std::string eval_ckpt, eval_data, eval_out;
    cmd_eval->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
    cmd_eval->add_option("--data", eval_data, "dataset root")->required();
    cmd_eval->add_option("--out", eval_out, "report directory (writes report.txt, report.kv)");

    // --- ndvi ----------------------------------------------------------
    auto* cmd_ndvi = app.add_subcommand("ndvi", "render a vegetation index");
    std::string vi_ckpt, vi_view_arg, vi_out, vi_data, vi_index = "ndvi";
    double vi_lsoil = 0.5;
    cmd_ndvi->add_option("--ckpt", vi_ckpt, "checkpoint")->required();
    cmd_ndvi->add_option("--view", vi_view_arg, "view index (with --data) or pose file")
        ->required();
    cmd_ndvi->add_option("--out", vi_out, "output 16-bit grayscale image")->required();
    cmd_ndvi->add_option("--data", vi_data, "dataset root for --view by index");
    cmd_ndvi->add_option("--index", vi_index, "ndvi|gndvi|savi");
    cmd_ndvi->add_option("--lsoil", vi_lsoil, "SAVI soil adjustment factor");

    // --- register ------------------------------------------------------
    auto* cmd_reg = app.add_subcommand("register", "rigid MI registration of two images");
    std::string reg_ref, reg_moving, reg_out;
    RegistrationSearch search;
    double reg_max_rot_deg = 5.0;
    cmd_reg->add_option("--ref", reg_ref, "reference image")->required();
    cmd_reg->add_option("--moving", reg_moving, "image to align")->required();
    cmd_reg->add_option("--bins", search.bins, "histogram bins");
    cmd_reg->add_option("--max-shift", search.max_translation, "translation bound (px)");
    cmd_reg->add_option("--max-rot-deg", reg_max_rot_deg, "rotation bound (degrees)");
    cmd_reg->add_option("--out", reg_out, "gradient error map of the aligned pair (16-bit)");

    // --- synth ---------------------------------------------------------
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    SynthConfig synth;
    std::string synth_out;
    cmd_synth->add_option("--out", synth_out, "output directory")->required();
    cmd_synth->add_option("--seed", synth.seed, "rng seed");
    cmd_synth->add_option("--gaussians", synth.n_gaussians, "primitive count");
    cmd_synth->add_option("--views-per-band", synth.views_per_band, "views per band");
    cmd_synth->add_option("--size", synth.image_size, "image size (square)");
    cmd_synth->add_option("--rgb-detail", synth.rgb_detail_coupling,
                          "high-frequency latent coupling into visible bands");
    cmd_synth->add_option("--nir-detail", synth.nir_detail_coupling,
                          "high-frequency latent coupling into NIR-like bands");

    // --- payload -------------------------------------------------------
    auto* cmd_payload = app.add_subcommand("payload", "per-primitive float arithmetic");
    std::string payload_model = "neural";
    int payload_dim = 8, payload_degree = 3, payload_channels = 7;
    int64_t payload_count = 1000000;
    cmd_payload->add_option("--color-model", payload_model, "neural|sh");
    cmd_payload->add_option("--feature-dim", payload_dim, "feature size (neural)");
    cmd_payload->add_option("--sh-degree", payload_degree, "SH degree (sh)");
    cmd_payload->add_option("--channels", payload_channels, "total channel count B (sh)");
    cmd_payload->add_option("--count", payload_count, "primitive count for the size estimate");

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    set_thread_count(threads);

    try {
        if (*cmd_train) {
            Dataset ds = load_dataset(train_data);
            if (!train_bands.empty()) ds = filter_bands(ds, split_csv(train_bands));
            if (train_color == "sh")
                cfg.color_model = ColorModelKind::per_band_sh;
            else
                require(train_color == "neural", ErrorClass::parse_error,
                        "unknown color model '" + train_color + "'");
            Trainer trainer(ds, cfg);
            std::string log_path = train_log.empty() ? train_out + ".log" : train_log;
            std::ofstream log(log_path);
            require(log.good(), ErrorClass::io_error, "cannot write log '" + log_path + "'");
            Checkpoint ckpt = trainer.train(&log);
            save_checkpoint(ckpt, train_out);
            std::cout << "checkpoint=" << train_out << " primitives=" << ckpt.cloud.count()
                      << " log=" << log_path << "\n";
        } else if (*cmd_render) {
            Checkpoint ckpt = load_checkpoint(render_ckpt);
            int band = ckpt.bands.find_or_throw(render_band);
            CameraView view = resolve_view(render_view_arg, render_data);
            view.band_index = band;
            Image img = render_image(ckpt.cloud, model_of(ckpt), ckpt.bands, band, view,
                                     ckpt.config.background);
            write_image16(img, render_out);
            std::cout << "image=" << render_out << "\n";
        } else if (*cmd_eval) {
            Checkpoint ckpt = load_checkpoint(eval_ckpt);
            Dataset ds = load_dataset(eval_data);
            for (int b = 0; b < ds.bands.size(); ++b)
                ckpt.bands.find_or_throw(ds.bands[b].name);
            TrainEvalSplit split = split_train_eval(ds.views);
            std::vector<CameraView> views;
            std::vector<Image> images;
            for (size_t i : split.eval) {
                views.push_back(ds.views[i]);
                images.push_back(ds.images[i]);
            }
            EvalReport report = evaluate(ckpt.cloud, model_of(ckpt), ckpt.bands, views, images,
                                         ckpt.config.background);
            print_eval_report(std::cout, report);
            if (!eval_out.empty()) {
                fs::create_directories(eval_out);
                std::ofstream txt((fs::path(eval_out) / "report.txt").string());
                print_eval_report(txt, report);
                write_eval_kv((fs::path(eval_out) / "report.kv").string(), report);
            }
        } else if (*cmd_ndvi) {
            Checkpoint ckpt = load_checkpoint(vi_ckpt);
            CameraView view = resolve_view(vi_view_arg, vi_data);
            VegetationIndex index = vegetation_index_from_name(vi_index);
            VIResult vi = render_vegetation_index(ckpt.cloud, model_of(ckpt), ckpt.bands, view,
                                                  index, vi_lsoil);
            write_image16(vi_to_grayscale16(vi.values), vi_out);
            ColorizedVI color = colorize_vi(vi.values);
            fs::path base(vi_out);
            std::string color_path = (base.parent_path() / (base.stem().string() + "_color.png"))
                                         .string();
            write_image8(color.rgb, color_path);
            size_t invalid = 0;
            for (uint8_t v : vi.valid) invalid += v ? 0 : 1;
            std::cout << "index=" << vi_index << " image=" << vi_out << " color=" << color_path
                      << " invalid_pixels=" << invalid << "\n";
        } else if (*cmd_reg) {
            Image ref = read_image(reg_ref);
            Image moving = read_image(reg_moving);
            require(ref.channels == 1 && moving.channels == 1, ErrorClass::shape_mismatch,
                    "registration expects single-channel images");
            search.max_rotation = reg_max_rot_deg * 3.14159265358979323846 / 180.0;
            RegistrationResult result = mi_register(ref, moving, search);
            std::printf("tx=%.4f ty=%.4f phi_deg=%.4f mi=%.6f identity_mi=%.6f\n",
                        result.transform.tx, result.transform.ty,
                        result.transform.phi * 180.0 / 3.14159265358979323846, result.mi,
                        result.identity_mi);
            if (!reg_out.empty()) {
                WarpedImage aligned = warp_rigid(moving, result.transform);
                write_image16(gradient_error_map(ref, aligned.image), reg_out);
            }
        } else if (*cmd_synth) {
            fs::create_directories(synth_out);
            Checkpoint gt = make_synthetic_scene(synth_out, synth);
            std::cout << "dataset=" << synth_out << " primitives=" << gt.cloud.count()
                      << " bands=" << gt.bands.size() << "\n";
        } else if (*cmd_payload) {
            ColorModelSpec spec;
            if (payload_model == "neural") {
                spec = ColorModelSpec::neural_model(payload_dim);
            } else if (payload_model == "sh") {
                spec.kind = ColorModelKind::per_band_sh;
                spec.sh_degree = payload_degree;
                spec.total_channels = payload_channels;
            } else {
                fail(ErrorClass::parse_error, "unknown color model '" + payload_model + "'");
            }
            int floats = payload_floats_per_primitive(spec);
            double mb = static_cast<double>(floats) * 4.0 * static_cast<double>(payload_count) /
                        (1024.0 * 1024.0);
            std::cout << floats << "\n";
            std::printf("floats_per_primitive=%d count=%lld size_estimate_mb=%.1f (float32)\n",
                        floats, static_cast<long long>(payload_count), mb);
            if (payload_model == "neural") {
                ColorDecoder dec = init_decoder(payload_dim, 32, 1, payload_channels, 0);
                std::printf("mlp_parameters=%zu\n", dec.parameter_count());
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
