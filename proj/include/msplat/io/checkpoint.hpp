#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "msplat/bands.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"
#include "msplat/decoder.hpp"
#include "msplat/sh_model.hpp"
#include "msplat/train_config.hpp"

namespace msplat {

/// Trained model snapshot. Round-trips through save/load bit-exactly.
struct Checkpoint {
    SpectralBandSet bands;
    GaussianCloud cloud;
    ColorModelKind color_model = ColorModelKind::neural;
    ColorDecoder decoder;  // when neural
    SHColorModel sh;       // when per_band_sh
    int64_t iteration = 0;
    TrainConfig config;
};

namespace ckpt_detail {

constexpr char kMagic[4] = {'M', 'S', 'P', 'C'};
constexpr uint32_t kVersion = 1;

inline uint32_t crc32(const uint8_t* data, size_t n) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

/// Little-endian byte sink.
class Writer {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void f64_array(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    const std::vector<uint8_t>& bytes() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

class Reader {
public:
    Reader(const uint8_t* data, size_t n) : data_(data), size_(n) {}

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<double> f64_array() {
        uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (uint64_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    size_t position() const { return pos_; }

private:
    void need(size_t n) {
        require(pos_ + n <= size_, ErrorClass::truncated_file, "checkpoint ends unexpectedly");
    }
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

inline void write_config(Writer& w, const TrainConfig& c) {
    w.u8(1);  // config layout version
    w.i64(c.iterations);
    w.u64(c.seed);
    w.f64(c.lr_feature);
    w.f64(c.lr_mlp);
    w.f64(c.lr_position);
    w.f64(c.lr_position_final);
    w.f64(c.lr_opacity);
    w.f64(c.lr_scale);
    w.f64(c.lr_rotation);
    w.f64(c.adam_beta1);
    w.f64(c.adam_beta2);
    w.f64(c.adam_eps);
    w.i64(c.warmup_iters);
    w.f64(c.rgb_sampling_weight);
    w.u8(c.deterministic_interleave ? 1 : 0);
    w.i64(c.densify_interval);
    w.f64(c.tau_grad);
    w.i64(c.densify_start);
    w.i64(c.densify_stop);
    w.i64(c.opacity_reset_interval);
    w.u8(c.opacity_reset_enabled ? 1 : 0);
    w.i64(c.quarter_res_until);
    w.i64(c.half_res_until);
    w.f64(c.weights.lambda);
    w.f64(c.weights.lambda_norm);
    w.f64(c.weights.lambda_smooth);
    w.f64(c.weights.lambda_cos);
    w.u8(c.weights.dssim_halved ? 1 : 0);
    w.u8(static_cast<uint8_t>(c.color_model));
    w.u32(static_cast<uint32_t>(c.feature_dim));
    w.u32(static_cast<uint32_t>(c.hidden_width));
    w.u32(static_cast<uint32_t>(c.hidden_layers));
    w.u32(static_cast<uint32_t>(c.sh_degree));
    w.u32(static_cast<uint32_t>(c.knn_init_k));
    w.u32(static_cast<uint32_t>(c.knn_cos_k));
    w.f64(c.background);
    w.i64(c.eval_interval);
}

inline TrainConfig read_config(Reader& r) {
    uint8_t layout = r.u8();
    require(layout == 1, ErrorClass::version_mismatch, "unknown config layout");
    TrainConfig c;
    c.iterations = r.i64();
    c.seed = r.u64();
    c.lr_feature = r.f64();
    c.lr_mlp = r.f64();
    c.lr_position = r.f64();
    c.lr_position_final = r.f64();
    c.lr_opacity = r.f64();
    c.lr_scale = r.f64();
    c.lr_rotation = r.f64();
    c.adam_beta1 = r.f64();
    c.adam_beta2 = r.f64();
    c.adam_eps = r.f64();
    c.warmup_iters = r.i64();
    c.rgb_sampling_weight = r.f64();
    c.deterministic_interleave = r.u8() != 0;
    c.densify_interval = r.i64();
    c.tau_grad = r.f64();
    c.densify_start = r.i64();
    c.densify_stop = r.i64();
    c.opacity_reset_interval = r.i64();
    c.opacity_reset_enabled = r.u8() != 0;
    c.quarter_res_until = r.i64();
    c.half_res_until = r.i64();
    c.weights.lambda = r.f64();
    c.weights.lambda_norm = r.f64();
    c.weights.lambda_smooth = r.f64();
    c.weights.lambda_cos = r.f64();
    c.weights.dssim_halved = r.u8() != 0;
    c.color_model = static_cast<ColorModelKind>(r.u8());
    c.feature_dim = static_cast<int>(r.u32());
    c.hidden_width = static_cast<int>(r.u32());
    c.hidden_layers = static_cast<int>(r.u32());
    c.sh_degree = static_cast<int>(r.u32());
    c.knn_init_k = static_cast<int>(r.u32());
    c.knn_cos_k = static_cast<int>(r.u32());
    c.background = r.f64();
    c.eval_interval = r.i64();
    return c;
}

}  // namespace ckpt_detail

inline std::vector<uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    using namespace ckpt_detail;
    Writer w;
    w.u8(kMagic[0]);
    w.u8(kMagic[1]);
    w.u8(kMagic[2]);
    w.u8(kMagic[3]);
    w.u32(kVersion);

    // bands
    w.u32(static_cast<uint32_t>(ckpt.bands.size()));
    for (int b = 0; b < ckpt.bands.size(); ++b) {
        const BandDescriptor& bd = ckpt.bands[b];
        w.str(bd.name);
        w.u32(static_cast<uint32_t>(bd.channel_count));
        w.u8(bd.wavelength_nm ? 1 : 0);
        w.f64(bd.wavelength_nm ? *bd.wavelength_nm : 0.0);
    }

    // cloud
    w.u64(ckpt.cloud.count());
    w.u32(static_cast<uint32_t>(ckpt.cloud.feature_dim));
    w.f64_array(ckpt.cloud.positions);
    w.f64_array(ckpt.cloud.rotations);
    w.f64_array(ckpt.cloud.log_scales);
    w.f64_array(ckpt.cloud.opacity_logits);
    w.f64_array(ckpt.cloud.features);

    // appearance
    w.u8(static_cast<uint8_t>(ckpt.color_model));
    if (ckpt.color_model == ColorModelKind::neural) {
        w.u32(static_cast<uint32_t>(ckpt.decoder.feature_dim));
        w.u32(static_cast<uint32_t>(ckpt.decoder.hidden_width));
        w.u32(static_cast<uint32_t>(ckpt.decoder.hidden_layers));
        w.u32(static_cast<uint32_t>(ckpt.decoder.output_dim));
        w.u32(static_cast<uint32_t>(ckpt.decoder.layers.size()));
        for (const auto& layer : ckpt.decoder.layers) {
            w.u32(static_cast<uint32_t>(layer.in));
            w.u32(static_cast<uint32_t>(layer.out));
            w.f64_array(layer.weights);
            w.f64_array(layer.biases);
        }
    } else {
        w.u32(static_cast<uint32_t>(ckpt.sh.degree));
        w.u32(static_cast<uint32_t>(ckpt.sh.total_channels));
        w.f64_array(ckpt.sh.coeffs);
    }

    w.i64(ckpt.iteration);
    write_config(w, ckpt.config);

    std::vector<uint8_t> bytes = w.bytes();
    uint32_t crc = crc32(bytes.data(), bytes.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>(crc >> (8 * i)));
    return bytes;
}

inline Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes) {
    using namespace ckpt_detail;
    require(bytes.size() >= 12, ErrorClass::truncated_file, "checkpoint too small");
    uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + static_cast<size_t>(i)])
                      << (8 * i);
    require(crc32(bytes.data(), bytes.size() - 4) == stored_crc, ErrorClass::checksum_mismatch,
            "checkpoint checksum failure");

    Reader r(bytes.data(), bytes.size() - 4);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    require(std::memcmp(magic, kMagic, 4) == 0, ErrorClass::parse_error, "not a checkpoint file");
    uint32_t version = r.u32();
    require(version == kVersion, ErrorClass::version_mismatch,
            "checkpoint version " + std::to_string(version) + " not supported");

    Checkpoint ckpt;
    uint32_t n_bands = r.u32();
    std::vector<BandDescriptor> bd(n_bands);
    for (auto& b : bd) {
        b.name = r.str();
        b.channel_count = static_cast<int>(r.u32());
        bool has_wl = r.u8() != 0;
        double wl = r.f64();
        if (has_wl) b.wavelength_nm = wl;
    }
    ckpt.bands = SpectralBandSet(std::move(bd));

    uint64_t s = r.u64();
    ckpt.cloud.feature_dim = static_cast<int>(r.u32());
    ckpt.cloud.positions = r.f64_array();
    ckpt.cloud.rotations = r.f64_array();
    ckpt.cloud.log_scales = r.f64_array();
    ckpt.cloud.opacity_logits = r.f64_array();
    ckpt.cloud.features = r.f64_array();
    require(ckpt.cloud.count() == s, ErrorClass::parse_error, "cloud arrays inconsistent");
    ckpt.cloud.check_consistent();

    ckpt.color_model = static_cast<ColorModelKind>(r.u8());
    if (ckpt.color_model == ColorModelKind::neural) {
        ckpt.decoder.feature_dim = static_cast<int>(r.u32());
        ckpt.decoder.hidden_width = static_cast<int>(r.u32());
        ckpt.decoder.hidden_layers = static_cast<int>(r.u32());
        ckpt.decoder.output_dim = static_cast<int>(r.u32());
        uint32_t n_layers = r.u32();
        ckpt.decoder.layers.resize(n_layers);
        for (auto& layer : ckpt.decoder.layers) {
            layer.in = static_cast<int>(r.u32());
            layer.out = static_cast<int>(r.u32());
            layer.weights = r.f64_array();
            layer.biases = r.f64_array();
        }
    } else {
        ckpt.sh.degree = static_cast<int>(r.u32());
        ckpt.sh.total_channels = static_cast<int>(r.u32());
        ckpt.sh.coeffs = r.f64_array();
    }

    ckpt.iteration = r.i64();
    ckpt.config = read_config(r);
    return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::vector<uint8_t> bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorClass::io_error, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorClass::io_error, "write failure on '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorClass::io_error, "cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace msplat
