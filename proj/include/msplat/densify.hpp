#pragma once

#include <vector>

#include "msplat/adam.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"

namespace msplat {

/// Per-primitive, per-band accumulators of homodirectional view-space
/// gradients: the running sum of |g_hat| norms and the number of render
/// participations, kept separately for every spectral band.
struct DensifyState {
    size_t primitive_count = 0;
    int band_count = 0;
    std::vector<double> grad_norm_sum;  // S x bands
    std::vector<int> participation;     // S x bands

    DensifyState() = default;
    DensifyState(size_t s, int bands) { reset(s, bands); }

    void reset(size_t s, int bands) {
        primitive_count = s;
        band_count = bands;
        grad_norm_sum.assign(s * static_cast<size_t>(bands), 0.0);
        participation.assign(s * static_cast<size_t>(bands), 0);
    }

    double sum_at(size_t i, int band) const {
        return grad_norm_sum[i * static_cast<size_t>(band_count) + band];
    }
    int count_at(size_t i, int band) const {
        return participation[i * static_cast<size_t>(band_count) + band];
    }
};

/// Folds one view's homodirectional gradients into the accumulator under the
/// view's band. Only primitives that participated in the render are counted.
inline void accumulate_view_gradients(DensifyState& state, int band,
                                      const std::vector<Vec2>& homodir,
                                      const std::vector<uint8_t>& participated) {
    require(band >= 0 && band < state.band_count, ErrorClass::index_out_of_range,
            "band index out of range");
    require(homodir.size() == state.primitive_count && participated.size() == homodir.size(),
            ErrorClass::shape_mismatch, "gradient arrays disagree with accumulator size");
    for (size_t i = 0; i < homodir.size(); ++i) {
        if (!participated[i]) continue;
        size_t idx = i * static_cast<size_t>(state.band_count) + band;
        state.grad_norm_sum[idx] += homodir[i].norm();
        state.participation[idx] += 1;
    }
}

/// The max-average criterion: a primitive densifies when the largest
/// per-band average gradient norm exceeds tau_grad. Bands it never rendered
/// in are ignored; a primitive with no participation anywhere stays put.
inline std::vector<uint8_t> densification_mask(const DensifyState& state, double tau_grad) {
    std::vector<uint8_t> mask(state.primitive_count, 0);
    for (size_t i = 0; i < state.primitive_count; ++i) {
        double best = -1.0;
        for (int b = 0; b < state.band_count; ++b) {
            int n = state.count_at(i, b);
            if (n <= 0) continue;
            best = std::max(best, state.sum_at(i, b) / n);
        }
        mask[i] = (best > tau_grad) ? 1 : 0;
    }
    return mask;
}

/// Optimizer moments for every per-primitive parameter group.
struct CloudOptimizers {
    AdamState position;   // 3S
    AdamState rotation;   // 4S
    AdamState log_scale;  // 3S
    AdamState opacity;    // S
    AdamState feature;    // dS
};

namespace densify_detail {

// Row widths per parameter group, in the order the edit helpers walk them.
struct RowSpec {
    std::vector<double>* data;
    AdamState* adam;  // may be null
    int width;
};

inline std::vector<RowSpec> row_specs(GaussianCloud& cloud, CloudOptimizers* opt) {
    return {
        {&cloud.positions, opt ? &opt->position : nullptr, 3},
        {&cloud.rotations, opt ? &opt->rotation : nullptr, 4},
        {&cloud.log_scales, opt ? &opt->log_scale : nullptr, 3},
        {&cloud.opacity_logits, opt ? &opt->opacity : nullptr, 1},
        {&cloud.features, opt ? &opt->feature : nullptr, cloud.feature_dim},
    };
}

inline void keep_rows(std::vector<double>& arr, const std::vector<uint8_t>& keep, int width) {
    size_t out = 0;
    for (size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        for (int k = 0; k < width; ++k)
            arr[out * static_cast<size_t>(width) + k] = arr[i * static_cast<size_t>(width) + k];
        ++out;
    }
    arr.resize(out * static_cast<size_t>(width));
}

}  // namespace densify_detail

constexpr double kSplitScaleDivisor = 1.6;
constexpr int kSplitChildren = 2;
constexpr double kSplitExtentFraction = 0.01;   // clone-vs-split threshold
constexpr double kPruneOpacityFloor = 0.005;
constexpr double kPruneScaleFraction = 0.1;     // world-size prune threshold

/// Extra per-primitive row storage that must follow the cloud's row edits
/// (e.g. the SH baseline's coefficient table).
struct ExtraRowArray {
    std::vector<double>* data = nullptr;
    AdamState* adam = nullptr;
    int width = 0;
};

/// Splits or clones every masked primitive. Large primitives (max activated
/// scale above 0.01 * scene_extent) are replaced by two children sampled
/// from the parent's own distribution with scales divided by 1.6; smaller
/// ones are cloned in place. Features and opacity are copied; moments of new
/// rows start at zero; the gradient accumulator is reset.
inline void apply_densification(GaussianCloud& cloud, CloudOptimizers& opt, DensifyState& state,
                                const std::vector<uint8_t>& mask, double scene_extent, Rng& rng,
                                const std::vector<ExtraRowArray>& extras = {}) {
    size_t s = cloud.count();
    require(mask.size() == s, ErrorClass::shape_mismatch, "mask length mismatch");
    cloud.check_consistent();

    std::vector<uint8_t> keep(s, 1);
    std::vector<size_t> clone_ids, split_ids;
    for (size_t i = 0; i < s; ++i) {
        if (!mask[i]) continue;
        Vec3 sc = cloud.scale(i);
        double max_scale = std::max(sc.x, std::max(sc.y, sc.z));
        if (max_scale > kSplitExtentFraction * scene_extent) {
            split_ids.push_back(i);
            keep[i] = 0;  // parent removed
        } else {
            clone_ids.push_back(i);
        }
    }

    // New rows copy their parent, clones first then split children, so every
    // attached array can replay the same order.
    std::vector<size_t> parent_of_new;
    for (size_t i : clone_ids) parent_of_new.push_back(i);
    for (size_t i : split_ids)
        for (int c = 0; c < kSplitChildren; ++c) parent_of_new.push_back(i);

    struct NewRow {
        Vec3 pos;
        Quat rot;
        Vec3 log_scale;
        double opacity_logit;
        std::vector<double> feature;
    };
    std::vector<NewRow> added;
    for (size_t i : clone_ids) {
        NewRow r{cloud.position(i), cloud.rotation(i), cloud.log_scale(i),
                 cloud.opacity_logits[i],
                 std::vector<double>(cloud.feature(i), cloud.feature(i) + cloud.feature_dim)};
        added.push_back(std::move(r));
    }
    double log_div = std::log(kSplitScaleDivisor);
    for (size_t i : split_ids) {
        Mat3 r = rotation_from_quat(cloud.rotation(i));
        Vec3 sc = cloud.scale(i);
        for (int child = 0; child < kSplitChildren; ++child) {
            Vec3 local{rng.normal() * sc.x, rng.normal() * sc.y, rng.normal() * sc.z};
            NewRow row;
            row.pos = cloud.position(i) + r * local;
            row.rot = cloud.rotation(i);
            Vec3 ls = cloud.log_scale(i);
            row.log_scale = {ls.x - log_div, ls.y - log_div, ls.z - log_div};
            row.opacity_logit = cloud.opacity_logits[i];
            row.feature.assign(cloud.feature(i), cloud.feature(i) + cloud.feature_dim);
            added.push_back(std::move(row));
        }
    }

    // Attached arrays first (they need the parents' rows before the edit).
    for (const auto& extra : extras) {
        std::vector<double> new_rows;
        for (size_t parent : parent_of_new)
            new_rows.insert(new_rows.end(),
                            extra.data->begin() + static_cast<ptrdiff_t>(parent * extra.width),
                            extra.data->begin() + static_cast<ptrdiff_t>((parent + 1) * extra.width));
        densify_detail::keep_rows(*extra.data, keep, extra.width);
        extra.data->insert(extra.data->end(), new_rows.begin(), new_rows.end());
        if (extra.adam) {
            extra.adam->ensure_size(s * static_cast<size_t>(extra.width));
            densify_detail::keep_rows(extra.adam->m, keep, extra.width);
            densify_detail::keep_rows(extra.adam->v, keep, extra.width);
        }
    }

    auto specs = densify_detail::row_specs(cloud, &opt);
    for (auto& spec : specs) {
        densify_detail::keep_rows(*spec.data, keep, spec.width);
        if (spec.adam) {
            spec.adam->ensure_size(s * static_cast<size_t>(spec.width));
            densify_detail::keep_rows(spec.adam->m, keep, spec.width);
            densify_detail::keep_rows(spec.adam->v, keep, spec.width);
        }
    }
    for (const auto& row : added) {
        cloud.positions.insert(cloud.positions.end(), {row.pos.x, row.pos.y, row.pos.z});
        cloud.rotations.insert(cloud.rotations.end(), {row.rot.w, row.rot.x, row.rot.y, row.rot.z});
        cloud.log_scales.insert(cloud.log_scales.end(),
                                {row.log_scale.x, row.log_scale.y, row.log_scale.z});
        cloud.opacity_logits.push_back(row.opacity_logit);
        cloud.features.insert(cloud.features.end(), row.feature.begin(), row.feature.end());
    }
    size_t new_s = cloud.count();
    for (auto& spec : specs) {
        if (!spec.adam) continue;
        spec.adam->m.resize(new_s * static_cast<size_t>(spec.width), 0.0);
        spec.adam->v.resize(new_s * static_cast<size_t>(spec.width), 0.0);
    }
    for (const auto& extra : extras) {
        if (!extra.adam) continue;
        extra.adam->m.resize(new_s * static_cast<size_t>(extra.width), 0.0);
        extra.adam->v.resize(new_s * static_cast<size_t>(extra.width), 0.0);
    }
    cloud.check_consistent();
    state.reset(new_s, state.band_count);
}

/// Removes primitives with activated opacity below the floor or a world
/// scale above 0.1 * scene_extent. All per-primitive arrays stay aligned.
inline void prune_primitives(GaussianCloud& cloud, CloudOptimizers& opt, DensifyState& state,
                             double scene_extent, double opacity_floor = kPruneOpacityFloor,
                             const std::vector<ExtraRowArray>& extras = {}) {
    size_t s = cloud.count();
    std::vector<uint8_t> keep(s, 1);
    bool any = false;
    for (size_t i = 0; i < s; ++i) {
        Vec3 sc = cloud.scale(i);
        double max_scale = std::max(sc.x, std::max(sc.y, sc.z));
        if (cloud.opacity(i) < opacity_floor || max_scale > kPruneScaleFraction * scene_extent) {
            keep[i] = 0;
            any = true;
        }
    }
    if (!any) return;
    auto specs = densify_detail::row_specs(cloud, &opt);
    for (auto& spec : specs) {
        densify_detail::keep_rows(*spec.data, keep, spec.width);
        if (spec.adam) {
            spec.adam->ensure_size(s * static_cast<size_t>(spec.width));
            densify_detail::keep_rows(spec.adam->m, keep, spec.width);
            densify_detail::keep_rows(spec.adam->v, keep, spec.width);
        }
    }
    for (const auto& extra : extras) {
        densify_detail::keep_rows(*extra.data, keep, extra.width);
        if (extra.adam) {
            extra.adam->ensure_size(s * static_cast<size_t>(extra.width));
            densify_detail::keep_rows(extra.adam->m, keep, extra.width);
            densify_detail::keep_rows(extra.adam->v, keep, extra.width);
        }
    }
    cloud.check_consistent();
    state.reset(cloud.count(), state.band_count);
}

/// Scene extent: radius of the camera-center bounding sphere around their
/// centroid.
inline double scene_extent_of(const std::vector<Vec3>& camera_centers) {
    if (camera_centers.empty()) return 1.0;
    Vec3 mean{};
    for (const auto& c : camera_centers) mean += c;
    mean = mean * (1.0 / static_cast<double>(camera_centers.size()));
    double radius = 0.0;
    for (const auto& c : camera_centers) radius = std::max(radius, (c - mean).norm());
    return radius > 0.0 ? radius : 1.0;
}

}  // namespace msplat
