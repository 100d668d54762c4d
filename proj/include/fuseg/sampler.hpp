#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fuseg/corruption.hpp"
#include "fuseg/depth.hpp"
#include "fuseg/ops.hpp"
#include "fuseg/rng.hpp"
#include "fuseg/scene.hpp"

namespace fuseg {

enum class TrainMode { slm, rlm };

enum class RlmCategory { clean, partial, full };

/// Training-time augmentation policy: RLM mixes clean, polygon-disturbed and
/// stream-failure samples at weights 1:2:4; SLM trains on clean data with the
/// same geometric augmentation.
struct AugPolicy {
    TrainMode mode = TrainMode::slm;
    double w_clean = 1.0, w_partial = 2.0, w_full = 4.0;
    double resize_lo = 0.5, resize_hi = 2.0;
    double flip_prob = 0.5;
    int polygon_count = 3;
};

inline RlmCategory draw_rlm_category(const AugPolicy& p, Rng& rng) {
    const double total = p.w_clean + p.w_partial + p.w_full;
    const double u = rng.uniform(0.0, total);
    if (u < p.w_clean) return RlmCategory::clean;
    if (u < p.w_clean + p.w_partial) return RlmCategory::partial;
    return RlmCategory::full;
}

namespace sampler_detail {

inline Tensor hflip(const Tensor& t) {
    Tensor out(t.shape);
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(ch, y, x) = t.at(ch, y, w - 1 - x);
    return out;
}

inline LabelMap hflip(const LabelMap& m) {
    LabelMap out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
    return out;
}

inline Tensor center_crop_pad(const Tensor& t, int out_h, int out_w, double pad) {
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    Tensor out({c, out_h, out_w}, pad);
    const int sy = std::max(0, (h - out_h) / 2), dy = std::max(0, (out_h - h) / 2);
    const int sx = std::max(0, (w - out_w) / 2), dx = std::max(0, (out_w - w) / 2);
    const int ch_copy = std::min(h, out_h), cw_copy = std::min(w, out_w);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < ch_copy; ++y)
            for (int x = 0; x < cw_copy; ++x)
                out.at(ch, dy + y, dx + x) = t.at(ch, sy + y, sx + x);
    return out;
}

inline LabelMap center_crop_pad(const LabelMap& m, int out_h, int out_w, std::uint8_t pad) {
    LabelMap out(out_h, out_w, pad);
    const int sy = std::max(0, (m.h - out_h) / 2), dy = std::max(0, (out_h - m.h) / 2);
    const int sx = std::max(0, (m.w - out_w) / 2), dx = std::max(0, (out_w - m.w) / 2);
    const int ch_copy = std::min(m.h, out_h), cw_copy = std::min(m.w, out_w);
    for (int y = 0; y < ch_copy; ++y)
        for (int x = 0; x < cw_copy; ++x) out.at(dy + y, dx + x) = m.at(sy + y, sx + x);
    return out;
}

}  // namespace sampler_detail

struct GeomParams {
    bool flip = false;
    double scale = 1.0;
};

/// Joint geometric transform of all sample fields back to (out_h, out_w):
/// bilinear for camera, nearest for depth (sentinel-preserving), labels
/// (ignore-padded) and true depth. Scaled extents re-clamp to 8 pixels.
inline SensorSample apply_geometric(const SensorSample& in, const GeomParams& p, int out_h,
                                    int out_w) {
    using namespace sampler_detail;
    SensorSample s = in;
    if (p.flip) {
        s.camera = hflip(s.camera);
        s.depth.values = hflip(s.depth.values);
        s.labels = hflip(s.labels);
        s.true_depth = hflip(s.true_depth);
    }
    const int rh = std::max(8, static_cast<int>(std::lround(s.camera.dim(1) * p.scale)));
    const int rw = std::max(8, static_cast<int>(std::lround(s.camera.dim(2) * p.scale)));
    if (rh != s.camera.dim(1) || rw != s.camera.dim(2)) {
        s.camera = bilinear_resize(s.camera, rh, rw);
        s.depth.values = fuseg::nearest_resize(s.depth.values, rh, rw);
        s.labels = fuseg::nearest_resize(s.labels, rh, rw);
        s.true_depth = fuseg::nearest_resize(s.true_depth, rh, rw);
    }
    if (rh != out_h || rw != out_w) {
        s.camera = center_crop_pad(s.camera, out_h, out_w, 0.0);
        s.depth.values = center_crop_pad(s.depth.values, out_h, out_w, 0.0);
        s.labels = center_crop_pad(s.labels, out_h, out_w, kIgnoreLabel);
        s.true_depth = center_crop_pad(s.true_depth, out_h, out_w, kDepthCap);
    }
    return s;
}

/// One network-ready training sample plus the augmentation bookkeeping.
struct TrainDraw {
    Tensor camera;  // normalized
    Tensor depth;   // inverse-depth [1,H,W]
    LabelMap labels;
    RlmCategory category = RlmCategory::clean;
    Stream stream = Stream::camera;
    GeomParams geom;
};

inline SensorSample to_sensor_sample(const Sample& raw, const CameraIntrinsics& k,
                                     int densify_radius = kDefaultDensifyRadius) {
    SensorSample s;
    s.camera = raw.image;
    s.depth = densify(project_points(raw.points, k), densify_radius);
    s.labels = raw.labels;
    s.true_depth = raw.true_depth;
    return s;
}

/// Core of draw_training_sample, operating on a pre-densified sample so the
/// training loop can keep the dataset in memory.
inline TrainDraw draw_from_sensor_sample(const SensorSample& base, const AugPolicy& policy,
                                         std::uint64_t draw_seed) {
    Rng rng(derive_seed(draw_seed, 0xd4aa));
    GeomParams geom;
    geom.flip = rng.bernoulli(policy.flip_prob);
    geom.scale = rng.uniform(policy.resize_lo, policy.resize_hi);
    const int out_h = base.camera.dim(1), out_w = base.camera.dim(2);
    SensorSample s = apply_geometric(base, geom, out_h, out_w);

    TrainDraw d;
    d.geom = geom;
    if (policy.mode == TrainMode::rlm) {
        d.category = draw_rlm_category(policy, rng);
        if (d.category != RlmCategory::clean) {
            d.stream = rng.bernoulli(0.5) ? Stream::camera : Stream::depth;
            if (d.category == RlmCategory::partial) {
                CorruptionSpec def;
                s = apply_polygons(std::move(s), d.stream, policy.polygon_count, def.area_lo,
                                   def.area_hi, rng.next_u64());
            } else {
                s = apply_blackout(std::move(s), d.stream);
            }
        }
    }
    d.camera = normalize_image(s.camera);
    d.depth = std::move(s.depth.values);
    d.labels = std::move(s.labels);
    return d;
}

/// Pure function of (dataset, index, policy, seed).
inline TrainDraw draw_training_sample(const Dataset& ds, int index, const AugPolicy& policy,
                                      std::uint64_t seed,
                                      int densify_radius = kDefaultDensifyRadius) {
    const Sample raw = ds.load("train", index);
    return draw_from_sensor_sample(to_sensor_sample(raw, ds.intrinsics(), densify_radius), policy,
                                   derive_seed(seed, static_cast<std::uint64_t>(index)));
}

// ---------------------------------------------------------------------------
// Adverse evaluation set: fixed per-index corruption assignment with
// composition 1/7 clean, 4/7 polygons (camera/depth round-robin), 2/7
// blackout (round-robin). Independent of any model.
// ---------------------------------------------------------------------------

struct AdverseAssignment {
    CorruptionSpec spec;
    std::uint64_t seed;  // per-sample corruption seed
};

inline std::vector<AdverseAssignment> build_adverse_eval_set(int n_val, std::uint64_t seed) {
    std::vector<AdverseAssignment> out;
    out.reserve(static_cast<std::size_t>(n_val));
    int poly_k = 0, black_k = 0;
    for (int i = 0; i < n_val; ++i) {
        AdverseAssignment a;
        a.seed = derive_seed(seed, 0xadee, static_cast<std::uint64_t>(i));
        const int r = i % 7;
        if (r == 0) {
            a.spec.kind = CorruptionKind::clean;
        } else if (r <= 4) {
            a.spec.kind = CorruptionKind::polygons;
            a.spec.stream = (poly_k++ % 2 == 0) ? Stream::camera : Stream::depth;
        } else {
            a.spec.kind = CorruptionKind::blackout;
            a.spec.stream = (black_k++ % 2 == 0) ? Stream::camera : Stream::depth;
        }
        out.push_back(a);
    }
    return out;
}

inline std::vector<AdverseAssignment> build_adverse_eval_set(const Dataset& ds,
                                                             std::uint64_t seed) {
    return build_adverse_eval_set(ds.manifest.val_n, seed);
}

}  // namespace fuseg
