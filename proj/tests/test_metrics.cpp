#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "msplat/msplat.hpp"

using namespace msplat;

namespace {

// Literal transcriptions of the metric formulas, kept independent of the
// implementation they check.
double sam_oracle(const std::vector<double>& r, const std::vector<double>& t) {
    double rt = 0, rr = 0, tt = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        rt += r[i] * t[i];
        rr += r[i] * r[i];
        tt += t[i] * t[i];
    }
    return std::acos(rt / (std::sqrt(rr) * std::sqrt(tt)));
}

double scm_oracle(const std::vector<double>& r, const std::vector<double>& t) {
    double n = static_cast<double>(r.size());
    double mr = 0, mt = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        mr += r[i];
        mt += t[i];
    }
    mr /= n;
    mt /= n;
    double num = 0, dr = 0, dt = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        num += (r[i] - mr) * (t[i] - mt);
        dr += (r[i] - mr) * (r[i] - mr);
        dt += (t[i] - mt) * (t[i] - mt);
    }
    return num / (std::sqrt(dr) * std::sqrt(dt));
}

double sid_oracle(const std::vector<double>& r, const std::vector<double>& t) {
    double sr = 0, st = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        sr += r[i];
        st += t[i];
    }
    double acc = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        double p = r[i] / sr, q = t[i] / st;
        acc += p * std::log(p / q) + q * std::log(q / p);
    }
    return acc;
}

}  // namespace

TEST_CASE("psnr") {
    Image a(4, 4, 1), b(4, 4, 1);
    for (auto& v : a.data) v = 0.5;
    SECTION("identical images hit the infinity sentinel") {
        CHECK(std::isinf(psnr(a, a)));
    }
    SECTION("mse of 0.01 is 20 dB") {
        b = a;
        for (auto& v : b.data) v += 0.1;
        CHECK(psnr(b, a) == Catch::Approx(20.0).epsilon(1e-9));
    }
    SECTION("mse of 1 is 0 dB") {
        for (auto& v : a.data) v = 0.0;
        for (auto& v : b.data) v = 1.0;
        CHECK(psnr(b, a) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("ssim metric") {
    Rng rng(1);
    Image a(16, 16, 1);
    for (auto& v : a.data) v = rng.uniform(0, 1);
    SECTION("identical images score one") {
        CHECK(ssim_metric(a, a) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("anti-correlated structure scores negative") {
        Image gt(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) gt.at(x, y, 0) = ((x / 2 + y / 2) % 2) ? 1.0 : 0.0;
        Image inv = gt;
        for (auto& v : inv.data) v = 1.0 - v;
        CHECK(ssim_metric(inv, gt) < 0.0);
    }
    SECTION("metric complements the dissimilarity loss") {
        Image b(16, 16, 1);
        for (auto& v : b.data) v = rng.uniform(0, 1);
        CHECK(ssim_metric(b, a) == Catch::Approx(1.0 - dssim_loss(b, a).value).epsilon(1e-12));
    }
}

TEST_CASE("spectral metric fixed values") {
    SECTION("sam") {
        CHECK(sam({1, 0}, {0, 1}) == Catch::Approx(M_PI / 2).epsilon(1e-12));
        CHECK(sam({0.3, 0.7, 0.1}, {0.3, 0.7, 0.1}) == Catch::Approx(0.0).margin(1e-7));
        CHECK(sam({1, 1}, {2, 2}) == Catch::Approx(0.0).margin(1e-7));
        CHECK_THROWS_AS(sam({0, 0}, {1, 1}), Error);
    }
    SECTION("scm") {
        CHECK(scm({1, 2, 3}, {2, 4, 6}) == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(scm({1, 2, 3}, {3, 2, 1}) == Catch::Approx(-1.0).epsilon(1e-12));
        CHECK(scm({1, 2, 3}, {1 + 5.0, 2 + 5.0, 3 + 5.0}) == Catch::Approx(1.0).epsilon(1e-12));
        CHECK_THROWS_AS(scm({1, 1, 1}, {1, 2, 3}), Error);
    }
    SECTION("sid") {
        CHECK(sid({0.4, 0.6}, {0.4, 0.6}) == Catch::Approx(0.0).margin(1e-12));
        CHECK(sid({3, 1}, {1, 3}) == Catch::Approx(std::log(3.0)).epsilon(1e-12));
        std::vector<double> r = {0.2, 0.5, 0.3};
        std::vector<double> scaled = {1.0, 2.5, 1.5};
        CHECK(sid(r, scaled) == Catch::Approx(0.0).margin(1e-12));
        CHECK_THROWS_AS(sid({0, 0}, {1, 1}), Error);
    }
}

TEST_CASE("spectral metrics equal their brute-force oracles") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t b = 2 + rng.uniform_index(9);
        std::vector<double> r(b), t(b);
        for (auto& v : r) v = rng.uniform(0.01, 1.0);
        for (auto& v : t) v = rng.uniform(0.01, 1.0);
        REQUIRE(std::fabs(sam(r, t) - sam_oracle(r, t)) < 1e-10);
        REQUIRE(std::fabs(sid(r, t) - sid_oracle(r, t)) < 1e-10);
        bool const_r = true, const_t = true;
        for (size_t i = 1; i < b; ++i) {
            const_r = const_r && r[i] == r[0];
            const_t = const_t && t[i] == t[0];
        }
        if (!const_r && !const_t)
            REQUIRE(std::fabs(scm(r, t) - scm_oracle(r, t)) < 1e-10);
    }
}

TEST_CASE("spectral metric symmetries and invariances") {
    Rng rng(78);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> r(5), t(5);
        for (auto& v : r) v = rng.uniform(0.01, 1.0);
        for (auto& v : t) v = rng.uniform(0.01, 1.0);
        REQUIRE(std::fabs(sam(r, t) - sam(t, r)) < 1e-14);
        REQUIRE(std::fabs(sid(r, t) - sid(t, r)) < 1e-14);
        REQUIRE(std::fabs(scm(r, t) - scm(t, r)) < 1e-14);
        double a = rng.uniform(0.1, 5.0), b = rng.uniform(0.1, 5.0);
        std::vector<double> ra = r, tb = t;
        for (auto& v : ra) v *= a;
        for (auto& v : tb) v *= b;
        REQUIRE(std::fabs(sam(ra, tb) - sam(r, t)) < 1e-10);
        REQUIRE(std::fabs(sid(ra, tb) - sid(r, t)) < 1e-10);
        double c = rng.uniform(-0.5, 0.5);
        std::vector<double> rc = r;
        for (auto& v : rc) v += c;
        REQUIRE(std::fabs(scm(rc, t) - scm(r, t)) < 1e-9);
    }
}

TEST_CASE("held-out evaluation on a self-consistent scene") {
    SpectralBandSet bands = default_band_set();
    Rng rng(5);
    GaussianCloud cloud;
    cloud.feature_dim = 8;
    for (int i = 0; i < 12; ++i) {
        cloud.positions.insert(cloud.positions.end(),
                               {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                                rng.uniform(-0.4, 0.4)});
        cloud.rotations.insert(cloud.rotations.end(), {1, 0, 0, 0});
        double ls = std::log(0.15);
        cloud.log_scales.insert(cloud.log_scales.end(), {ls, ls, ls});
        cloud.opacity_logits.push_back(logit(0.8));
        for (int k = 0; k < 8; ++k) cloud.features.push_back(rng.normal(0, 0.5));
    }
    ColorModel model;
    model.kind = ColorModelKind::neural;
    model.decoder = init_decoder(8, 16, 1, bands.total_channels(), 3);

    std::vector<CameraView> views;
    std::vector<Image> gts;
    for (int b = 0; b < bands.size(); ++b) {
        CameraView v;
        v.band_index = b;
        v.fx = v.fy = 40;
        v.cx = v.cy = 12;
        v.width = v.height = 24;
        v.rotation = Mat3::identity();
        v.translation = {0, 0, 2.5};
        views.push_back(v);
        gts.push_back(render_image(cloud, model, bands, b, v, 0.0));
    }

    EvalReport report = evaluate(cloud, model, bands, views, gts);
    REQUIRE(report.per_band.size() == static_cast<size_t>(bands.size()));
    for (const auto& b : report.per_band) {
        CHECK(std::isinf(b.psnr));
        CHECK(b.ssim == Catch::Approx(1.0).margin(1e-12));
    }
    CHECK(report.stack_groups == 1);
    // acos near cos = 1 amplifies the last bits: identical spectra score
    // within sqrt(machine-eps) of zero angle.
    CHECK(report.sam_mean == Catch::Approx(0.0).margin(1e-6));
    CHECK(report.sid_mean == Catch::Approx(0.0).margin(1e-12));
    CHECK(report.scm_mean == Catch::Approx(1.0).margin(1e-12));

    SECTION("reports are deterministic") {
        EvalReport again = evaluate(cloud, model, bands, views, gts);
        CHECK(again.mean_ssim == report.mean_ssim);
        CHECK(again.sam_mean == report.sam_mean);
    }
    SECTION("constant half vs constant 0.6 prediction scores 20 dB") {
        Image pred(24, 24, 1, 0.5), gt(24, 24, 1, 0.6);
        CHECK(psnr(pred, gt) == Catch::Approx(20.0).epsilon(1e-9));
    }
}
