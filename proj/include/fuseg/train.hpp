#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuseg/checkpoint.hpp"
#include "fuseg/config.hpp"
#include "fuseg/metrics.hpp"
#include "fuseg/model.hpp"
#include "fuseg/sampler.hpp"

namespace fuseg {

inline const char* kClassNames[kNumClasses] = {"background", "road",       "car",
                                               "pedestrian", "pole", "building"};

struct TrainOptions {
    int iters = 3000;
    int batch = 2;
    double base_lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    double lr_power = 0.9;
    std::uint64_t seed = 1;
    int densify_radius = kDefaultDensifyRadius;
    int log_every = 0;  // 0 = silent
};

struct CurvePoint {
    int iter;
    double loss;
    double lr;
};

// Single source of truth for turning a RunConfig into pipeline objects; the
// CLI and the acceptance suite both go through these.
inline AugPolicy make_policy(const RunConfig& cfg) {
    AugPolicy p;
    if (cfg.policy == "slm") p.mode = TrainMode::slm;
    else if (cfg.policy == "rlm") p.mode = TrainMode::rlm;
    else throw std::invalid_argument("policy must be slm or rlm, got '" + cfg.policy + "'");
    p.resize_lo = cfg.resize_lo;
    p.resize_hi = cfg.resize_hi;
    p.flip_prob = cfg.flip_prob;
    p.polygon_count = cfg.polygon_count;
    return p;
}

inline ModelConfig make_model_config(const RunConfig& cfg) {
    ModelConfig mc;
    mc.arch = parse_arch(cfg.arch);
    mc.width_full = cfg.width_full;
    mc.width_mid = cfg.width_mid;
    mc.width_low = cfg.width_low;
    mc.cff_width = cfg.cff_width;
    return mc;
}

inline TrainOptions make_train_options(const RunConfig& cfg) {
    TrainOptions opt;
    opt.iters = cfg.iters;
    opt.batch = cfg.batch;
    opt.base_lr = cfg.base_lr;
    opt.momentum = cfg.momentum;
    opt.weight_decay = cfg.weight_decay;
    opt.lr_power = cfg.lr_power;
    opt.seed = cfg.train_seed;
    opt.densify_radius = cfg.densify_radius;
    return opt;
}

inline std::vector<SensorSample> preload_split(const Dataset& ds, const std::string& split,
                                               int densify_radius) {
    std::vector<SensorSample> out;
    const int n = ds.count(split);
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(to_sensor_sample(ds.load(split, i), ds.intrinsics(), densify_radius));
    return out;
}

/// SGD training loop: accumulates batch-mean gradients over `batch` draws,
/// then one momentum step at the poly learning rate. Deterministic given the
/// seed. Aborts with a diagnostic if the loss becomes non-finite.
inline std::vector<CurvePoint> train(FusionModel& model, const Dataset& ds,
                                     const AugPolicy& policy, const TrainOptions& opt) {
    if (opt.iters < 1) throw std::invalid_argument("train: iters must be >= 1");
    const auto samples = preload_split(ds, "train", opt.densify_radius);
    if (samples.empty()) throw std::invalid_argument("train: empty training split");

    Rng rng(derive_seed(opt.seed, 0x7124a));
    std::vector<CurvePoint> curve;
    curve.reserve(static_cast<std::size_t>(opt.iters));
    const double inv_batch = 1.0 / opt.batch;

    for (int iter = 0; iter < opt.iters; ++iter) {
        const double lr = poly_lr(opt.base_lr, iter, opt.iters, opt.lr_power);
        double batch_loss = 0.0;
        for (int b = 0; b < opt.batch; ++b) {
            const int idx = rng.uniform_int(0, static_cast<int>(samples.size()) - 1);
            const std::uint64_t draw_seed = rng.next_u64();
            const TrainDraw d = draw_from_sensor_sample(samples[idx], policy, draw_seed);
            auto out = model.forward(d.camera, d.depth);
            Var loss = multi_scale_loss(out, d.labels);
            const double value = loss->value.data[0];
            if (!std::isfinite(value))
                throw std::runtime_error("train: non-finite loss at iteration " +
                                         std::to_string(iter) + " (lr " + std::to_string(lr) +
                                         ", sample " + std::to_string(idx) + ")");
            batch_loss += value * inv_batch;
            backward(weighted_sum({loss}, {inv_batch}));
        }
        sgd_step(model.params(), lr, opt.momentum, opt.weight_decay);
        curve.push_back({iter, batch_loss, lr});
        if (opt.log_every > 0 && (iter % opt.log_every == 0 || iter + 1 == opt.iters))
            std::fprintf(stderr, "iter %5d  loss %.4f  lr %.6f\n", iter, batch_loss, lr);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

inline LabelMap argmax_labels(const Tensor& logits) {
    const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    LabelMap out(h, w);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) {
        int best = 0;
        double bv = logits.data[i];
        for (int ch = 1; ch < c; ++ch) {
            const double v = logits.data[static_cast<std::size_t>(ch) * plane + i];
            if (v > bv) {
                bv = v;
                best = ch;
            }
        }
        out.v[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

inline LabelMap predict(const FusionModel& model, const SensorSample& s) {
    NoGradGuard guard;
    const auto out = model.forward(normalize_image(s.camera), s.depth.values);
    return argmax_labels(out.full->value);
}

struct SpecResult {
    std::string spec_text;
    ConfusionMatrix cm;
    double acc = 0.0;
    double miou_value = 0.0;
    std::vector<double> class_iou;
};

struct RunReport {
    std::vector<SpecResult> rows;
    std::map<std::string, std::string> config_echo;
};

/// Evaluates one corruption spec against every preloaded validation sample.
/// "adverse" denotes the fixed mixed composition from build_adverse_eval_set.
inline SpecResult evaluate_spec(const FusionModel& model,
                                const std::vector<SensorSample>& val,
                                const std::string& spec_text, std::uint64_t eval_seed) {
    SpecResult r;
    r.spec_text = spec_text;
    r.cm = ConfusionMatrix(model.config().num_classes);
    if (spec_text == "adverse") {
        const auto assignments = build_adverse_eval_set(static_cast<int>(val.size()), eval_seed);
        for (std::size_t i = 0; i < val.size(); ++i) {
            const SensorSample s =
                apply_corruption(val[i], assignments[i].spec, assignments[i].seed);
            accumulate(r.cm, predict(model, s), s.labels);
        }
    } else {
        const CorruptionSpec spec = parse_corruption(spec_text);
        for (std::size_t i = 0; i < val.size(); ++i) {
            const SensorSample s =
                apply_corruption(val[i], spec, derive_seed(eval_seed, 0xe7a1, i));
            accumulate(r.cm, predict(model, s), s.labels);
        }
    }
    r.acc = pixel_acc(r.cm);
    r.miou_value = miou(r.cm);
    r.class_iou = per_class_iou(r.cm);
    return r;
}

inline RunReport evaluate(const FusionModel& model, const Dataset& ds,
                          const std::vector<std::string>& spec_texts, std::uint64_t eval_seed,
                          int densify_radius = kDefaultDensifyRadius) {
    const auto val = preload_split(ds, "val", densify_radius);
    if (val.empty()) throw std::invalid_argument("evaluate: empty validation split");
    RunReport rep;
    for (const auto& text : spec_texts)
        rep.rows.push_back(evaluate_spec(model, val, text, eval_seed));
    return rep;
}

// ---------------------------------------------------------------------------
// Run comparison
// ---------------------------------------------------------------------------

struct RunsComparison {
    std::vector<std::string> specs;
    // delta[s][i][j] = miou(run i) - miou(run j) on spec s
    std::vector<std::vector<std::vector<double>>> delta;
};

inline RunsComparison compare_runs(const std::vector<const RunReport*>& reports) {
    if (reports.size() < 2) throw std::invalid_argument("compare_runs: need at least 2 reports");
    RunsComparison cmp;
    for (const auto& row : reports[0]->rows) cmp.specs.push_back(row.spec_text);
    for (const auto* rep : reports) {
        if (rep->rows.size() != cmp.specs.size())
            throw std::invalid_argument("compare_runs: mismatched eval sets");
        for (std::size_t s = 0; s < cmp.specs.size(); ++s) {
            if (rep->rows[s].spec_text != cmp.specs[s] ||
                rep->rows[s].cm.total() != reports[0]->rows[s].cm.total())
                throw std::invalid_argument("compare_runs: mismatched eval sets");
        }
    }
    cmp.delta.resize(cmp.specs.size());
    for (std::size_t s = 0; s < cmp.specs.size(); ++s) {
        cmp.delta[s].resize(reports.size(), std::vector<double>(reports.size(), 0.0));
        for (std::size_t i = 0; i < reports.size(); ++i)
            for (std::size_t j = 0; j < reports.size(); ++j)
                cmp.delta[s][i][j] =
                    reports[i]->rows[s].miou_value - reports[j]->rows[s].miou_value;
    }
    return cmp;
}

// ---------------------------------------------------------------------------
// CSV output (bit-stable %.17g formatting)
// ---------------------------------------------------------------------------

inline void write_config_echo(std::ofstream& f, const std::map<std::string, std::string>& echo) {
    for (const auto& [k, v] : echo) f << "# " << k << "=" << v << "\n";
}

inline void write_report_csv(const std::filesystem::path& path, const RunReport& rep) {
    auto f = detail::open_out(path, false);
    write_config_echo(f, rep.config_echo);
    f << "spec,acc,miou";
    for (const auto* name : kClassNames) f << ",iou_" << name;
    f << "\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        f << buf;
    };
    for (const auto& row : rep.rows) {
        f << row.spec_text << ",";
        put(row.acc);
        f << ",";
        put(row.miou_value);
        for (double iou : row.class_iou) {
            f << ",";
            if (std::isnan(iou)) f << "na";
            else put(iou);
        }
        f << "\n";
    }
}

inline void write_curve_csv(const std::filesystem::path& path,
                            const std::vector<CurvePoint>& curve,
                            const std::map<std::string, std::string>& echo) {
    auto f = detail::open_out(path, false);
    write_config_echo(f, echo);
    f << "iter,loss,lr\n";
    char buf[32];
    for (const auto& p : curve) {
        f << p.iter << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", p.loss);
        f << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", p.lr);
        f << buf << "\n";
    }
}

}  // namespace fuseg
