#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "msplat/msplat.hpp"

using namespace msplat;

namespace {

double decode_scalar(const ColorDecoder& dec, const std::vector<double>& feats,
                     const std::vector<double>& dirs, int n,
                     const std::vector<double>& out_weights) {
    std::vector<double> colors = decode_forward(feats, dirs, n, dec);
    double s = 0.0;
    for (size_t i = 0; i < colors.size(); ++i) s += colors[i] * out_weights[i];
    return s;
}

}  // namespace

TEST_CASE("spherical direction conventions") {
    Vec2 pole = direction_to_spherical(Vec3{0, 0, 1});
    CHECK(pole.x == Catch::Approx(0.0).margin(1e-12));
    CHECK(pole.y == Catch::Approx(0.0).margin(1e-12));
    Vec2 ex = direction_to_spherical(Vec3{1, 0, 0});
    CHECK(ex.x == Catch::Approx(M_PI / 2).margin(1e-12));
    CHECK(ex.y == Catch::Approx(0.0).margin(1e-12));
    Vec2 ey = direction_to_spherical(Vec3{0, 1, 0});
    CHECK(ey.x == Catch::Approx(M_PI / 2).margin(1e-12));
    CHECK(ey.y == Catch::Approx(M_PI / 2).margin(1e-12));
    CHECK_THROWS_AS(direction_to_spherical(Vec3{0, 0, 0}), Error);
    // Non-unit inputs are normalized.
    Vec2 big = direction_to_spherical(Vec3{0, 0, 42.0});
    CHECK(big.x == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("decoder initialization shapes and bounds") {
    ColorDecoder dec = init_decoder(8, 32, 1, 7, 99);
    REQUIRE(dec.layers.size() == 3);
    CHECK(dec.layers[0].in == 10);
    CHECK(dec.layers[0].out == 32);
    CHECK(dec.layers[1].in == 32);
    CHECK(dec.layers[1].out == 32);
    CHECK(dec.layers[2].in == 32);
    CHECK(dec.layers[2].out == 7);
    double bound = std::sqrt(6.0 / 10.0);
    for (double w : dec.layers[0].weights) {
        CHECK(std::fabs(w) <= bound);
    }
    for (double b : dec.layers[0].biases) CHECK(b == 0.0);

    ColorDecoder again = init_decoder(8, 32, 1, 7, 99);
    for (size_t l = 0; l < dec.layers.size(); ++l)
        CHECK(dec.layers[l].weights == again.layers[l].weights);
}

TEST_CASE("decode forward basics") {
    ColorDecoder dec = init_decoder(4, 16, 1, 5, 3);
    SECTION("empty batch") {
        std::vector<double> colors = decode_forward({}, {}, 0, dec);
        CHECK(colors.empty());
    }
    SECTION("all-zero weights give logistic(0) = 0.5") {
        for (auto& layer : dec.layers) {
            std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
            std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
        }
        std::vector<double> feats = {0.3, -0.2, 0.5, 0.1};
        std::vector<double> dirs = {1.0, 2.0};
        std::vector<double> colors = decode_forward(feats, dirs, 1, dec);
        for (double c : colors) CHECK(c == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("rows are independent: permuting inputs permutes outputs") {
        Rng rng(4);
        int n = 6, d = 4;
        std::vector<double> feats(static_cast<size_t>(n) * d), dirs(static_cast<size_t>(n) * 2);
        for (auto& f : feats) f = rng.normal(0, 0.5);
        for (auto& v : dirs) v = rng.uniform(-1.5, 1.5);
        std::vector<double> base = decode_forward(feats, dirs, n, dec);
        // Rotate rows by two.
        std::vector<double> f2(feats.size()), d2(dirs.size());
        for (int i = 0; i < n; ++i) {
            int j = (i + 2) % n;
            std::copy_n(feats.begin() + j * d, d, f2.begin() + i * d);
            std::copy_n(dirs.begin() + j * 2, 2, d2.begin() + i * 2);
        }
        std::vector<double> rotated = decode_forward(f2, d2, n, dec);
        for (int i = 0; i < n; ++i) {
            int j = (i + 2) % n;
            for (int c = 0; c < 5; ++c)
                CHECK(rotated[static_cast<size_t>(i) * 5 + c] ==
                      base[static_cast<size_t>(j) * 5 + c]);
        }
    }
    SECTION("outputs stay strictly inside (0,1)") {
        Rng rng(5);
        std::vector<double> feats(4), dirs(2);
        for (auto& f : feats) f = rng.normal(0, 3.0);
        for (auto& v : dirs) v = rng.uniform(-3, 3);
        std::vector<double> colors = decode_forward(feats, dirs, 1, dec);
        for (double c : colors) {
            CHECK(c > 0.0);
            CHECK(c < 1.0);
        }
    }
    SECTION("dimension mismatches are rejected") {
        CHECK_THROWS_AS(decode_forward({1, 2, 3}, {0, 0}, 1, dec), Error);
        DecodeCache cache;
        decode_forward({0.1, 0.2, 0.3, 0.4}, {0, 0}, 1, dec, &cache);
        DecoderGrads grads;
        CHECK_THROWS_AS(decode_backward(dec, cache, {1.0, 2.0}, grads), Error);
    }
}

TEST_CASE("decode backward matches central finite differences") {
    // Oracle: central differences of a weighted output sum, h = 1e-5.
    for (int hidden_layers : {1, 0}) {
        Rng rng(200 + hidden_layers);
        int d = 5, n = 3, b = 4;
        ColorDecoder dec = init_decoder(d, 12, hidden_layers, b, 17 + hidden_layers);
        std::vector<double> feats(static_cast<size_t>(n) * d), dirs(static_cast<size_t>(n) * 2);
        for (auto& f : feats) f = rng.normal(0, 0.7);
        for (auto& v : dirs) v = rng.uniform(-2, 2);
        std::vector<double> out_w(static_cast<size_t>(n) * b);
        for (auto& w : out_w) w = rng.normal(0, 1);

        DecodeCache cache;
        std::vector<double> colors = decode_forward(feats, dirs, n, dec, &cache);
        (void)colors;
        DecoderGrads grads;
        std::vector<double> d_feats = decode_backward(dec, cache, out_w, grads);

        const double h = 1e-5;
        auto rel = [](double a, double f) { return std::fabs(a - f) / (std::fabs(f) + 1e-8); };

        for (size_t k = 0; k < feats.size(); ++k) {
            std::vector<double> fp = feats, fm = feats;
            fp[k] += h;
            fm[k] -= h;
            double num = (decode_scalar(dec, fp, dirs, n, out_w) -
                          decode_scalar(dec, fm, dirs, n, out_w)) /
                         (2 * h);
            REQUIRE(rel(d_feats[k], num) < 1e-5);
        }
        for (size_t l = 0; l < dec.layers.size(); ++l) {
            for (size_t k = 0; k < dec.layers[l].weights.size(); k += 7) {
                ColorDecoder dp = dec, dm = dec;
                dp.layers[l].weights[k] += h;
                dm.layers[l].weights[k] -= h;
                double num = (decode_scalar(dp, feats, dirs, n, out_w) -
                              decode_scalar(dm, feats, dirs, n, out_w)) /
                             (2 * h);
                REQUIRE(rel(grads.layers[l].weights[k], num) < 1e-5);
            }
            for (size_t k = 0; k < dec.layers[l].biases.size(); k += 3) {
                ColorDecoder dp = dec, dm = dec;
                dp.layers[l].biases[k] += h;
                dm.layers[l].biases[k] -= h;
                double num = (decode_scalar(dp, feats, dirs, n, out_w) -
                              decode_scalar(dm, feats, dirs, n, out_w)) /
                             (2 * h);
                REQUIRE(rel(grads.layers[l].biases[k], num) < 1e-5);
            }
        }
    }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    ColorDecoder dec = init_decoder(4, 8, 1, 3, 9);
    std::vector<double> feats = {0.1, 0.2, -0.3, 0.4};
    std::vector<double> dirs = {0.5, -0.5};
    DecodeCache cache;
    decode_forward(feats, dirs, 1, dec, &cache);
    DecoderGrads grads;
    std::vector<double> d_feats = decode_backward(dec, cache, {0, 0, 0}, grads);
    for (double g : d_feats) CHECK(g == 0.0);
    for (const auto& layer : grads.layers) {
        for (double g : layer.weights) CHECK(g == 0.0);
        for (double g : layer.biases) CHECK(g == 0.0);
    }
}

TEST_CASE("dead input column blocks the feature gradient") {
    ColorDecoder dec = init_decoder(4, 8, 1, 3, 10);
    for (int o = 0; o < dec.layers[0].out; ++o) dec.layers[0].weights[static_cast<size_t>(o) * dec.layers[0].in + 2] = 0.0;
    std::vector<double> feats = {0.1, 0.2, -0.3, 0.4};
    std::vector<double> dirs = {0.5, -0.5};
    DecodeCache cache;
    decode_forward(feats, dirs, 1, dec, &cache);
    DecoderGrads grads;
    std::vector<double> d_feats = decode_backward(dec, cache, {1, 1, 1}, grads);
    CHECK(d_feats[2] == 0.0);
    CHECK(d_feats[0] != 0.0);
}

TEST_CASE("SH baseline evaluation") {
    SpectralBandSet bands = default_band_set();
    SECTION("DC coefficient only") {
        SHColorModel model = SHColorModel::zeros(1, 3, bands.total_channels());
        int off = bands.channel_offset(bands.find("NIR"));
        model.coeffs[static_cast<size_t>(off) * 16] = 0.7;  // c0 of the NIR channel
        std::vector<double> vals =
            sh_eval(model, {Vec3{0.3, -0.4, 0.866}.normalized()}, bands, bands.find("NIR"));
        CHECK(vals[0] == Catch::Approx(0.7 * 0.28209479 + 0.5).margin(1e-7));
    }
    SECTION("all zero coefficients give the 0.5 offset") {
        SHColorModel model = SHColorModel::zeros(2, 3, bands.total_channels());
        std::vector<double> vals = sh_eval(model, {Vec3{0, 0, 1}, Vec3{1, 0, 0}}, bands, 1);
        for (double v : vals) CHECK(v == 0.5);
    }
    SECTION("a band never reads another band's coefficients") {
        SHColorModel model = SHColorModel::zeros(2, 3, bands.total_channels());
        Rng rng(6);
        for (auto& c : model.coeffs) c = rng.normal(0, 0.1);
        std::vector<Vec3> dirs = {Vec3{0.2, 0.3, 0.93}.normalized(), Vec3{-0.5, 0.1, 0.86}.normalized()};
        int nir = bands.find("NIR");
        std::vector<double> before = sh_eval(model, dirs, bands, nir);
        int off_r = bands.channel_offset(bands.find("R"));
        for (int k = 0; k < 16; ++k) model.coeffs[static_cast<size_t>(off_r) * 16 + k] += 5.0;
        std::vector<double> after = sh_eval(model, dirs, bands, nir);
        CHECK(before == after);
    }
    SECTION("degree-1 terms are odd: opposite directions reflect about 0.5") {
        SHColorModel model = SHColorModel::zeros(1, 3, bands.total_channels());
        int off = bands.channel_offset(2);
        model.coeffs[static_cast<size_t>(off) * 16 + 1] = 0.2;
        model.coeffs[static_cast<size_t>(off) * 16 + 2] = -0.15;
        model.coeffs[static_cast<size_t>(off) * 16 + 3] = 0.1;
        Vec3 dir = Vec3{0.5, -0.7, 0.3}.normalized();
        std::vector<double> a = sh_eval(model, {dir}, bands, 2);
        std::vector<double> b = sh_eval(model, {dir * -1.0}, bands, 2);
        CHECK(a[0] + b[0] == Catch::Approx(1.0).margin(1e-12));
    }
}
