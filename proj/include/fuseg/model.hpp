#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuseg/autodiff.hpp"
#include "fuseg/optim.hpp"
#include "fuseg/rng.hpp"

namespace fuseg {

enum class Arch { early, late, img_only, depth_only };

inline std::string to_string(Arch a) {
    switch (a) {
        case Arch::early: return "early";
        case Arch::late: return "late";
        case Arch::img_only: return "img-only";
        case Arch::depth_only: return "depth-only";
    }
    throw std::logic_error("to_string(Arch): unreachable");
}

inline Arch parse_arch(const std::string& s) {
    if (s == "early") return Arch::early;
    if (s == "late") return Arch::late;
    if (s == "img-only") return Arch::img_only;
    if (s == "depth-only") return Arch::depth_only;
    throw std::invalid_argument("unknown arch '" + s + "' (want early|late|img-only|depth-only)");
}

struct ModelConfig {
    Arch arch = Arch::late;
    int num_classes = 6;
    int width_full = 16, width_mid = 24, width_low = 32;  // channels per scale 1, 1/2, 1/4
    int cff_width = 32;
};

/// Miniature ICNet-style segmentation net. Three resolution branches (inputs
/// at scale 1, 1/2, 1/4; each encoder halves its resolution once), merged by
/// two cascade feature fusion stages, each emitting auxiliary logits from the
/// upsampled low-resolution branch. Late fusion runs separate camera/depth
/// encoders per scale and concatenates their features before the CFF cascade;
/// early fusion concatenates the raw sensor channels into one 4-channel input.
class FusionModel {
public:
    struct Output {
        Var full;  // [C, H, W]
        Var mid;   // [C, H/2, W/2]
        Var low;   // [C, H/4, W/4]
        std::vector<Var> cam_feats;  // per-scale pre-fusion encoder outputs
        std::vector<Var> dep_feats;  // late fusion only
    };

    FusionModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
        Rng rng(derive_seed(init_seed, 0x30de1));
        const int widths[3] = {cfg.width_full, cfg.width_mid, cfg.width_low};
        const char* scales[3] = {"full", "mid", "low"};

        if (cfg.arch == Arch::late) {
            for (int s = 0; s < 3; ++s) {
                cam_c1_[s] = add_conv(std::string("cam_") + scales[s] + ".c1", widths[s], 3, 3, rng);
                cam_c2_[s] = add_conv(std::string("cam_") + scales[s] + ".c2", widths[s], widths[s], 3, rng);
            }
            for (int s = 0; s < 3; ++s) {
                dep_c1_[s] = add_conv(std::string("dep_") + scales[s] + ".c1", widths[s], 1, 3, rng);
                dep_c2_[s] = add_conv(std::string("dep_") + scales[s] + ".c2", widths[s], widths[s], 3, rng);
            }
        } else {
            const int in_ch = input_channels(cfg.arch);
            for (int s = 0; s < 3; ++s) {
                cam_c1_[s] = add_conv(std::string("enc_") + scales[s] + ".c1", widths[s], in_ch, 3, rng);
                cam_c2_[s] = add_conv(std::string("enc_") + scales[s] + ".c2", widths[s], widths[s], 3, rng);
            }
        }
        const int fuse_mult = cfg.arch == Arch::late ? 2 : 1;
        cff1_dil_ = add_conv("cff1.dilated", cfg.cff_width, fuse_mult * cfg.width_low, 3, rng);
        cff1_proj_ = add_conv("cff1.project", cfg.cff_width, fuse_mult * cfg.width_mid, 1, rng);
        cff1_aux_ = add_conv("cff1.aux", cfg.num_classes, fuse_mult * cfg.width_low, 1, rng);
        cff2_dil_ = add_conv("cff2.dilated", cfg.cff_width, cfg.cff_width, 3, rng);
        cff2_proj_ = add_conv("cff2.project", cfg.cff_width, fuse_mult * cfg.width_full, 1, rng);
        cff2_aux_ = add_conv("cff2.aux", cfg.num_classes, cfg.cff_width, 1, rng);
        head_ = add_conv("head", cfg.num_classes, cfg.cff_width, 1, rng);
    }

    static int input_channels(Arch a) {
        switch (a) {
            case Arch::early: return 4;
            case Arch::late: return 4;  // 3 camera + 1 depth across two encoders
            case Arch::img_only: return 3;
            case Arch::depth_only: return 1;
        }
        throw std::logic_error("input_channels: unreachable");
    }

    Output forward(const Tensor& camera, const Tensor& depth) const {
        const Tensor& shape_src = cfg_.arch == Arch::depth_only ? depth : camera;
        const int h = shape_src.dim(1), w = shape_src.dim(2);
        if (h % 4 != 0 || w % 4 != 0)
            throw std::invalid_argument("forward: input extents must be divisible by 4");

        Output out;
        Var fused_feats[3];
        if (cfg_.arch == Arch::late) {
            if (camera.dim(1) != depth.dim(1) || camera.dim(2) != depth.dim(2))
                throw std::invalid_argument("forward: camera/depth extent mismatch");
            Var cam = make_input(camera);
            Var dep = make_input(depth);
            for (int s = 0; s < 3; ++s) {
                Var ce = encode(scale_input(cam, s), cam_c1_[s], cam_c2_[s]);
                Var de = encode(scale_input(dep, s), dep_c1_[s], dep_c2_[s]);
                out.cam_feats.push_back(ce);
                out.dep_feats.push_back(de);
                fused_feats[s] = concat_channels(ce, de);
            }
        } else {
            Tensor in;
            switch (cfg_.arch) {
                case Arch::early: in = concat_channels(camera, depth); break;
                case Arch::img_only: in = camera; break;
                case Arch::depth_only: in = depth; break;
                default: throw std::logic_error("forward: unreachable");
            }
            Var x = make_input(std::move(in));
            for (int s = 0; s < 3; ++s) {
                Var e = encode(scale_input(x, s), cam_c1_[s], cam_c2_[s]);
                out.cam_feats.push_back(e);
                fused_feats[s] = e;
            }
        }

        // CFF stage 1: low (H/8) into mid (H/4)
        Var up1 = bilinear_resize(fused_feats[2], fused_feats[1]->value.dim(1),
                                  fused_feats[1]->value.dim(2));
        out.low = conv(up1, cff1_aux_, 1, 1);
        Var f1 = relu(add(conv(up1, cff1_dil_, 1, 2), conv(fused_feats[1], cff1_proj_, 1, 1)));

        // CFF stage 2: fused (H/4) into full branch (H/2)
        Var up2 = bilinear_resize(f1, fused_feats[0]->value.dim(1), fused_feats[0]->value.dim(2));
        out.mid = conv(up2, cff2_aux_, 1, 1);
        Var f2 = relu(add(conv(up2, cff2_dil_, 1, 2), conv(fused_feats[0], cff2_proj_, 1, 1)));

        out.full = bilinear_resize(conv(f2, head_, 1, 1), h, w);
        return out;
    }

    std::vector<ParamState>& params() { return params_; }
    const std::vector<ParamState>& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += p.value().numel();
        return n;
    }

private:
    struct ConvRef {
        int w = -1, b = -1;
    };

    ConvRef add_conv(const std::string& name, int cout, int cin, int k, Rng& rng) {
        // centered uniform scaled by fan-in (He bound); biases start at zero
        const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * k * k));
        Tensor weight({cout, cin, k, k});
        for (double& v : weight.data) v = rng.uniform(-bound, bound);
        ConvRef r;
        r.w = static_cast<int>(params_.size());
        params_.emplace_back(name + ".weight", std::move(weight));
        r.b = static_cast<int>(params_.size());
        params_.emplace_back(name + ".bias", Tensor({cout}));
        return r;
    }

    Var conv(const Var& x, const ConvRef& c, int stride, int dilation) const {
        return conv2d(x, params_[c.w].var, params_[c.b].var, stride, dilation, Padding::same);
    }

    Var encode(const Var& x, const ConvRef& c1, const ConvRef& c2) const {
        return relu(conv(relu(conv(x, c1, 2, 1)), c2, 1, 1));
    }

    static Var scale_input(const Var& x, int scale) {
        if (scale == 0) return x;
        return avg_downsample(x, scale == 1 ? 2 : 4);
    }

    ModelConfig cfg_;
    std::vector<ParamState> params_;
    ConvRef cam_c1_[3], cam_c2_[3];
    ConvRef dep_c1_[3], dep_c2_[3];
    ConvRef cff1_dil_, cff1_proj_, cff1_aux_;
    ConvRef cff2_dil_, cff2_proj_, cff2_aux_;
    ConvRef head_;
};

constexpr double kAuxWeightMid = 0.4;
constexpr double kAuxWeightLow = 0.16;

/// Weighted sum of the per-resolution cross-entropies; labels are downsampled
/// by nearest neighbor to each logits resolution.
inline Var multi_scale_loss(const Var& full, const Var& mid, const Var& low,
                            const LabelMap& labels, double w_full = 1.0,
                            double w_mid = kAuxWeightMid, double w_low = kAuxWeightLow,
                            int ignore_id = kIgnoreLabel) {
    const LabelMap lab_mid = nearest_resize(labels, mid->value.dim(1), mid->value.dim(2));
    const LabelMap lab_low = nearest_resize(labels, low->value.dim(1), low->value.dim(2));
    return weighted_sum({softmax_cross_entropy(full, labels, ignore_id),
                         softmax_cross_entropy(mid, lab_mid, ignore_id),
                         softmax_cross_entropy(low, lab_low, ignore_id)},
                        {w_full, w_mid, w_low});
}

inline Var multi_scale_loss(const FusionModel::Output& out, const LabelMap& labels,
                            double w_full = 1.0, double w_mid = kAuxWeightMid,
                            double w_low = kAuxWeightLow, int ignore_id = kIgnoreLabel) {
    return multi_scale_loss(out.full, out.mid, out.low, labels, w_full, w_mid, w_low, ignore_id);
}

}  // namespace fuseg
