#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "msplat/msplat.hpp"

using namespace msplat;

namespace {

GaussianCloud small_cloud(int count, double log_scale_value) {
    GaussianCloud cloud;
    cloud.feature_dim = 2;
    for (int i = 0; i < count; ++i) {
        cloud.positions.insert(cloud.positions.end(), {0.1 * i, 0.0, 1.0});
        cloud.rotations.insert(cloud.rotations.end(), {1, 0, 0, 0});
        cloud.log_scales.insert(cloud.log_scales.end(),
                                {log_scale_value, log_scale_value, log_scale_value});
        cloud.opacity_logits.push_back(logit(0.5));
        cloud.features.insert(cloud.features.end(), {0.1 * i, -0.1 * i});
    }
    return cloud;
}

CloudOptimizers sized_optimizers(const GaussianCloud& cloud) {
    CloudOptimizers opt;
    opt.position.ensure_size(cloud.positions.size());
    opt.rotation.ensure_size(cloud.rotations.size());
    opt.log_scale.ensure_size(cloud.log_scales.size());
    opt.opacity.ensure_size(cloud.opacity_logits.size());
    opt.feature.ensure_size(cloud.features.size());
    return opt;
}

}  // namespace

TEST_CASE("gradient accumulation") {
    DensifyState state(3, 2);
    SECTION("3-4-5 norm") {
        std::vector<Vec2> g = {{0.0003, 0.0004}, {0, 0}, {0, 0}};
        std::vector<uint8_t> part = {1, 0, 0};
        accumulate_view_gradients(state, 1, g, part);
        CHECK(state.sum_at(0, 1) == Catch::Approx(0.0005).epsilon(1e-12));
        CHECK(state.count_at(0, 1) == 1);
        CHECK(state.sum_at(0, 0) == 0.0);
    }
    SECTION("non-participating rows stay untouched") {
        std::vector<Vec2> g = {{1, 1}, {2, 2}, {3, 3}};
        std::vector<uint8_t> part = {0, 1, 0};
        accumulate_view_gradients(state, 0, g, part);
        CHECK(state.count_at(0, 0) == 0);
        CHECK(state.count_at(1, 0) == 1);
        CHECK(state.count_at(2, 0) == 0);
    }
    SECTION("two accumulations average correctly") {
        double a = 0.002;
        std::vector<uint8_t> part = {1, 0, 0};
        accumulate_view_gradients(state, 0, {{a, 0}, {0, 0}, {0, 0}}, part);
        accumulate_view_gradients(state, 0, {{0, a}, {0, 0}, {0, 0}}, part);
        CHECK(state.sum_at(0, 0) == Catch::Approx(2 * a));
        CHECK(state.count_at(0, 0) == 2);
        CHECK(state.sum_at(0, 0) / state.count_at(0, 0) == Catch::Approx(a));
    }
    SECTION("bad band index") {
        std::vector<Vec2> g(3);
        std::vector<uint8_t> part(3, 1);
        CHECK_THROWS_AS(accumulate_view_gradients(state, 5, g, part), Error);
    }
}

TEST_CASE("max-average criterion at the working threshold") {
    double tau = 0.0008;
    SECTION("one band above the threshold densifies") {
        DensifyState state(1, 2);
        state.grad_norm_sum = {0.0002 * 4, 0.0009 * 4};
        state.participation = {4, 4};
        auto mask = densification_mask(state, tau);
        CHECK(mask[0] == 1);
    }
    SECTION("all bands at 0.0005 stay put") {
        DensifyState state(1, 2);
        state.grad_norm_sum = {0.0005 * 3, 0.0005 * 5};
        state.participation = {3, 5};
        auto mask = densification_mask(state, tau);
        CHECK(mask[0] == 0);
    }
    SECTION("never-rendered primitives stay put") {
        DensifyState state(2, 2);
        state.grad_norm_sum = {0, 0, 0.009, 0};
        state.participation = {0, 0, 1, 0};
        auto mask = densification_mask(state, tau);
        CHECK(mask[0] == 0);
        CHECK(mask[1] == 1);
    }
    SECTION("band-specific sensitivity: zeroing the hot band flips the decision") {
        DensifyState state(1, 3);
        state.grad_norm_sum = {0.0004 * 6, 0.0003 * 6, 0.0012 * 6};
        state.participation = {6, 6, 6};
        CHECK(densification_mask(state, tau)[0] == 1);
        state.grad_norm_sum[2] = 0.0;
        state.participation[2] = 0;
        CHECK(densification_mask(state, tau)[0] == 0);
    }
}

TEST_CASE("densification apply") {
    double extent = 10.0;
    Rng rng(3);
    SECTION("empty mask leaves the cloud unchanged") {
        GaussianCloud cloud = small_cloud(3, std::log(0.05));
        GaussianCloud before = cloud;
        CloudOptimizers opt = sized_optimizers(cloud);
        DensifyState state(3, 2);
        apply_densification(cloud, opt, state, {0, 0, 0}, extent, rng);
        CHECK(cloud.count() == 3);
        CHECK(cloud.positions == before.positions);
        CHECK(cloud.features == before.features);
    }
    SECTION("a large masked primitive splits into two children") {
        GaussianCloud cloud = small_cloud(3, std::log(0.5));  // 0.5 > 0.01 * 10
        CloudOptimizers opt = sized_optimizers(cloud);
        DensifyState state(3, 2);
        apply_densification(cloud, opt, state, {0, 1, 0}, extent, rng);
        CHECK(cloud.count() == 4);  // parent removed, two children added
        // children carry the parent's scale divided by 1.6
        double expect = std::log(0.5) - std::log(1.6);
        CHECK(cloud.log_scales[3 * 2] == Catch::Approx(expect));
        CHECK(cloud.log_scales[3 * 3] == Catch::Approx(expect));
        CHECK(opt.position.m.size() == cloud.positions.size());
        CHECK(opt.feature.m.size() == cloud.features.size());
        CHECK(state.primitive_count == 4);
    }
    SECTION("a small masked primitive clones in place") {
        GaussianCloud cloud = small_cloud(3, std::log(0.05));  // 0.05 < 0.1
        CloudOptimizers opt = sized_optimizers(cloud);
        DensifyState state(3, 2);
        apply_densification(cloud, opt, state, {1, 0, 0}, extent, rng);
        CHECK(cloud.count() == 4);
        // clone copies position and features of primitive 0
        CHECK(cloud.positions[3 * 3] == cloud.positions[0]);
        CHECK(cloud.features[2 * 3] == cloud.features[0]);
    }
    SECTION("split children scatter around the parent mean") {
        double mean_x = 0.0;
        int children = 0;
        for (uint64_t seed = 0; seed < 200; ++seed) {
            GaussianCloud cloud = small_cloud(1, std::log(0.5));
            CloudOptimizers opt = sized_optimizers(cloud);
            DensifyState state(1, 1);
            Rng r2(seed);
            apply_densification(cloud, opt, state, {1}, extent, r2);
            REQUIRE(cloud.count() == 2);
            for (size_t i = 0; i < 2; ++i) {
                mean_x += cloud.positions[3 * i];
                ++children;
            }
        }
        // parent mean is 0; sample mean of children within 3 sigma/sqrt(n)
        mean_x /= children;
        CHECK(std::fabs(mean_x) < 3.0 * 0.5 / std::sqrt(static_cast<double>(children)));
    }
}

TEST_CASE("pruning") {
    double extent = 10.0;
    SECTION("healthy primitives survive") {
        GaussianCloud cloud = small_cloud(3, std::log(0.05));
        CloudOptimizers opt = sized_optimizers(cloud);
        DensifyState state(3, 2);
        prune_primitives(cloud, opt, state, extent);
        CHECK(cloud.count() == 3);
    }
    SECTION("nearly transparent primitives are removed") {
        GaussianCloud cloud = small_cloud(3, std::log(0.05));
        cloud.opacity_logits[1] = logit(0.001);
        CloudOptimizers opt = sized_optimizers(cloud);
        DensifyState state(3, 2);
        prune_primitives(cloud, opt, state, extent);
        CHECK(cloud.count() == 2);
        CHECK(opt.position.m.size() == cloud.positions.size());
    }
    SECTION("oversized primitives are removed") {
        GaussianCloud cloud = small_cloud(3, std::log(0.05));
        cloud.log_scales[3] = std::log(2.0);  // 2.0 > 0.1 * 10
        CloudOptimizers opt = sized_optimizers(cloud);
        DensifyState state(3, 2);
        prune_primitives(cloud, opt, state, extent);
        CHECK(cloud.count() == 2);
    }
    SECTION("an empty cloud stays empty") {
        GaussianCloud cloud;
        cloud.feature_dim = 2;
        CloudOptimizers opt;
        DensifyState state(0, 2);
        prune_primitives(cloud, opt, state, extent);
        CHECK(cloud.count() == 0);
    }
}

TEST_CASE("scene extent from camera centers") {
    std::vector<Vec3> centers = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
    CHECK(scene_extent_of(centers) == Catch::Approx(1.0));
    CHECK(scene_extent_of({}) == 1.0);
}
