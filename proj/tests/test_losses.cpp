#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "msplat/msplat.hpp"

using namespace msplat;

namespace {

Image random_image(Rng& rng, int w, int h, int c) {
    Image img(w, h, c);
    for (auto& v : img.data) v = rng.uniform(0.02, 0.98);
    return img;
}

// Relative error with an absolute floor of 1e-9, the noise level of a
// central difference on a double-precision loss value.
double rel_err(double a, double f) {
    if (std::fabs(a - f) < 1e-9) return 0.0;
    return std::fabs(a - f) / (std::fabs(f) + 1e-8);
}

}  // namespace

TEST_CASE("l1 loss") {
    Rng rng(1);
    Image gt = random_image(rng, 6, 5, 2);
    SECTION("identical images") {
        auto r = l1_loss(gt, gt);
        CHECK(r.value == 0.0);
        for (double g : r.grad.data) CHECK(g == 0.0);
    }
    SECTION("constant offset") {
        Image pred = gt;
        for (auto& v : pred.data) v += 0.1;
        auto r = l1_loss(pred, gt);
        CHECK(r.value == Catch::Approx(0.1).margin(1e-12));
        double n = static_cast<double>(gt.value_count());
        for (double g : r.grad.data) CHECK(g == Catch::Approx(1.0 / n));
    }
    SECTION("shape mismatch") {
        Image bad(4, 4, 2);
        CHECK_THROWS_AS(l1_loss(bad, gt), Error);
    }
}

TEST_CASE("dssim loss values") {
    Rng rng(2);
    SECTION("identical images give zero") {
        Image gt = random_image(rng, 16, 16, 1);
        auto r = dssim_loss(gt, gt);
        CHECK(r.value == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("inverted binary image exceeds one") {
        Image gt(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) gt.at(x, y, 0) = ((x / 2 + y / 2) % 2) ? 1.0 : 0.0;
        Image pred = gt;
        for (auto& v : pred.data) v = 1.0 - v;
        auto r = dssim_loss(pred, gt);
        CHECK(r.value > 1.0);
    }
    SECTION("images below the window size are rejected") {
        Image small(8, 8, 1);
        CHECK_THROWS_AS(dssim_loss(small, small), Error);
    }
    SECTION("halved variant is half the value") {
        Image gt = random_image(rng, 16, 16, 1);
        Image pred = random_image(rng, 16, 16, 1);
        CHECK(dssim_loss(pred, gt, true).value ==
              Catch::Approx(0.5 * dssim_loss(pred, gt, false).value));
    }
}

TEST_CASE("dssim gradient matches finite differences") {
    Rng rng(3);
    Image gt = random_image(rng, 16, 16, 2);
    Image pred = random_image(rng, 16, 16, 2);
    auto r = dssim_loss(pred, gt);
    const double h = 3e-6;
    for (size_t k = 0; k < pred.data.size(); k += 5) {
        double keep = pred.data[k];
        pred.data[k] = keep + h;
        double up = dssim_loss(pred, gt).value;
        pred.data[k] = keep - h;
        double dn = dssim_loss(pred, gt).value;
        pred.data[k] = keep;
        REQUIRE(rel_err(r.grad.data[k], (up - dn) / (2 * h)) < 1e-4);
    }
}

TEST_CASE("feature norm regularizer") {
    SECTION("unit norms vanish") {
        std::vector<double> f = {1, 0, 0, 0, 0.6, 0.8};
        auto r = feature_norm_reg(f, 3);
        CHECK(r.value == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("norm 2 contributes one") {
        std::vector<double> f = {2, 0, 0};
        auto r = feature_norm_reg(f, 3);
        CHECK(r.value == Catch::Approx(1.0));
    }
    SECTION("zero feature contributes one with zero gradient") {
        std::vector<double> f = {0, 0, 0};
        auto r = feature_norm_reg(f, 3);
        CHECK(r.value == Catch::Approx(1.0));
        for (double g : r.grad) CHECK(g == 0.0);
    }
    SECTION("rotation invariance in feature space") {
        Rng rng(4);
        std::vector<double> f(10 * 2);
        for (auto& v : f) v = rng.normal(0, 1);
        double base = feature_norm_reg(f, 2).value;
        double a = 0.7;  // rotate every 2-vector by the same angle
        std::vector<double> rot(f.size());
        for (size_t i = 0; i < f.size(); i += 2) {
            rot[i] = std::cos(a) * f[i] - std::sin(a) * f[i + 1];
            rot[i + 1] = std::sin(a) * f[i] + std::cos(a) * f[i + 1];
        }
        CHECK(feature_norm_reg(rot, 2).value == Catch::Approx(base).epsilon(1e-12));
    }
    SECTION("gradient matches finite differences") {
        Rng rng(5);
        std::vector<double> f(8 * 4);
        for (auto& v : f) v = rng.normal(0, 1);
        auto r = feature_norm_reg(f, 4);
        const double h = 1e-6;
        for (size_t k = 0; k < f.size(); ++k) {
            double keep = f[k];
            f[k] = keep + h;
            double up = feature_norm_reg(f, 4).value;
            f[k] = keep - h;
            double dn = feature_norm_reg(f, 4).value;
            f[k] = keep;
            REQUIRE(rel_err(r.grad[k], (up - dn) / (2 * h)) < 1e-4);
        }
    }
}

TEST_CASE("smoothness loss") {
    SECTION("constant image is perfectly smooth") {
        Image img(5, 4, 1);
        for (auto& v : img.data) v = 0.37;
        auto r = smoothness_loss(img);
        CHECK(r.value == 0.0);
    }
    SECTION("two-pixel gradient evaluates to h/4") {
        double step = 0.4;
        Image img(2, 1, 1);
        img.at(0, 0, 0) = 0.0;
        img.at(1, 0, 0) = step;
        auto r = smoothness_loss(img);
        CHECK(r.value == Catch::Approx(step / 4.0));
    }
    SECTION("gradient matches finite differences") {
        Rng rng(6);
        Image img = random_image(rng, 7, 6, 1);
        auto r = smoothness_loss(img);
        const double h = 1e-7;
        for (size_t k = 0; k < img.data.size(); ++k) {
            double keep = img.data[k];
            img.data[k] = keep + h;
            double up = smoothness_loss(img).value;
            img.data[k] = keep - h;
            double dn = smoothness_loss(img).value;
            img.data[k] = keep;
            REQUIRE(rel_err(r.grad.data[k], (up - dn) / (2 * h)) < 1e-6);
        }
    }
    SECTION("multi-channel input is rejected") {
        Image img(4, 4, 3);
        CHECK_THROWS_AS(smoothness_loss(img), Error);
    }
}

TEST_CASE("cosine neighborhood loss") {
    SECTION("identical features are perfectly coherent") {
        std::vector<double> f = {0.5, 0.2, 0.5, 0.2, 0.5, 0.2};
        std::vector<int> knn = {1, 2, 0, 2, 0, 1};  // k = 2
        auto r = cosine_knn_loss(f, 2, knn, 2);
        CHECK(r.value == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("orthogonal pair scores one, antipodal two") {
        std::vector<double> f = {1, 0, 0, 1};
        std::vector<int> knn = {1, 0};
        auto r = cosine_knn_loss(f, 2, knn, 1);
        CHECK(r.value == Catch::Approx(1.0));
        std::vector<double> g = {1, 0, -1, 0};
        auto r2 = cosine_knn_loss(g, 2, knn, 1);
        CHECK(r2.value == Catch::Approx(2.0));
    }
    SECTION("out-of-range neighbor index is an error") {
        std::vector<double> f = {1, 0, 0, 1};
        std::vector<int> knn = {3, 0};
        CHECK_THROWS_AS(cosine_knn_loss(f, 2, knn, 1), Error);
    }
    SECTION("gradient matches finite differences") {
        Rng rng(7);
        int s = 6, d = 3, k = 2;
        std::vector<double> f(static_cast<size_t>(s) * d);
        for (auto& v : f) v = rng.normal(0, 1);
        std::vector<Vec3> pos(static_cast<size_t>(s));
        for (auto& p : pos) p = {rng.normal(), rng.normal(), rng.normal()};
        std::vector<int> knn = knn_indices(pos, k);
        auto r = cosine_knn_loss(f, d, knn, k);
        const double h = 1e-6;
        for (size_t i = 0; i < f.size(); ++i) {
            double keep = f[i];
            f[i] = keep + h;
            double up = cosine_knn_loss(f, d, knn, k).value;
            f[i] = keep - h;
            double dn = cosine_knn_loss(f, d, knn, k).value;
            f[i] = keep;
            REQUIRE(rel_err(r.grad[i], (up - dn) / (2 * h)) < 1e-4);
        }
    }
}

TEST_CASE("total loss composition") {
    Rng rng(8);
    LossWeights weights;  // lambda 0.2, lambda_norm 0.1
    SECTION("perfect render with unit features is zero") {
        Image gt = random_image(rng, 16, 16, 1);
        std::vector<double> f = {1, 0, 0, 0, 1, 0};
        auto r = total_loss(gt, gt, f, 3, weights);
        CHECK(r.value == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("lambda zero reduces to l1 plus regularizer") {
        Image gt = random_image(rng, 16, 16, 1);
        Image pred = random_image(rng, 16, 16, 1);
        std::vector<double> f = {0.5, 0.5, 1.5, 0.2};
        LossWeights w0 = weights;
        w0.lambda = 0.0;
        auto r = total_loss(pred, gt, f, 2, w0);
        double expect = l1_loss(pred, gt).value + 0.1 * feature_norm_reg(f, 2).value;
        CHECK(r.value == Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("defaults compose the constituent terms") {
        Image gt = random_image(rng, 16, 16, 1);
        Image pred = gt;
        for (auto& v : pred.data) v = std::min(1.0, v + 0.1);
        std::vector<double> f = {1, 0};
        auto r = total_loss(pred, gt, f, 2, weights);
        double expect = 0.8 * l1_loss(pred, gt).value + 0.2 * dssim_loss(pred, gt).value;
        CHECK(r.value == Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("total loss is non-negative") {
        Image gt = random_image(rng, 16, 16, 2);
        Image pred = random_image(rng, 16, 16, 2);
        std::vector<double> f = {0.3, -0.4, 2.0, 0.0};
        auto r = total_loss(pred, gt, f, 2, weights);
        CHECK(r.value >= 0.0);
    }
}
