// fuseg command line: dataset generation, training, evaluation, rendering.

#include <cstring>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "fuseg/fuseg.hpp"

namespace fs = std::filesystem;
using namespace fuseg;

namespace {

// Distinguishes bad user input (exit 1) from runtime failures (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_specs(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string tok =
            comma == std::string::npos ? text.substr(pos) : text.substr(pos, comma - pos);
        if (!tok.empty()) out.push_back(tok);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw UsageError("--specs: empty spec list");
    for (const auto& s : out) {
        if (s == "adverse") continue;
        try {
            parse_corruption(s);
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--specs: ") + e.what());
        }
    }
    return out;
}

AugPolicy policy_from_config(const RunConfig& cfg) {
    try {
        return make_policy(cfg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--policy: ") + e.what());
    }
}

ModelConfig model_config(const RunConfig& cfg) {
    try {
        return make_model_config(cfg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--arch: ") + e.what());
    }
}

std::map<std::string, std::string> train_echo(const RunConfig& cfg, const Dataset& ds) {
    auto echo = cfg.to_map();
    echo["data_seed"] = std::to_string(ds.manifest.spec.seed);
    echo["train_n"] = std::to_string(ds.manifest.train_n);
    echo["val_n"] = std::to_string(ds.manifest.val_n);
    echo["image_h"] = std::to_string(ds.manifest.spec.image_h);
    echo["image_w"] = std::to_string(ds.manifest.spec.image_w);
    return echo;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out, bool force) {
    const fs::path root(out);
    if (fs::exists(root) && !fs::is_empty(root) && !force)
        throw std::runtime_error("output directory " + out +
                                 " is not empty (use --force to overwrite)");
    SceneSpec spec;
    spec.seed = cfg.data_seed;
    spec.image_h = cfg.image_h;
    spec.image_w = cfg.image_w;
    build_dataset(spec, cfg.train_n, cfg.val_n, root);
    std::cout << "wrote " << cfg.train_n << " train + " << cfg.val_n << " val samples to " << out
              << " (seed " << cfg.data_seed << ")\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data, const std::string& out) {
    const AugPolicy policy = policy_from_config(cfg);
    const ModelConfig mc = model_config(cfg);
    const Dataset ds = Dataset::open(data);

    FusionModel model(mc, cfg.train_seed);
    TrainOptions opt = make_train_options(cfg);
    opt.log_every = std::max(1, cfg.iters / 10);

    const auto curve = train(model, ds, policy, opt);

    fs::create_directories(out);
    const auto echo = train_echo(cfg, ds);
    save_checkpoint(fs::path(out) / "checkpoint.ckpt", model, echo);
    write_curve_csv(fs::path(out) / "curve.csv", curve, echo);
    std::cout << "trained " << cfg.arch << "/" << cfg.policy << " for " << cfg.iters
              << " iters; final loss " << curve.back().loss << "; checkpoint in " << out << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& data,
             const std::string& out) {
    const auto specs = split_specs(cfg.eval_specs);
    const Checkpoint ck = load_checkpoint(checkpoint);
    const FusionModel model = model_from_checkpoint(ck);
    const Dataset ds = Dataset::open(data);

    RunReport rep = evaluate(model, ds, specs, cfg.eval_seed, cfg.densify_radius);
    rep.config_echo = ck.manifest;
    rep.config_echo["eval_seed"] = std::to_string(cfg.eval_seed);
    rep.config_echo["eval_specs"] = cfg.eval_specs;
    rep.config_echo["eval_data_seed"] = std::to_string(ds.manifest.spec.seed);
    write_report_csv(out, rep);
    for (const auto& row : rep.rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-24s acc %.4f  miou %.4f", row.spec_text.c_str(),
                      row.acc, row.miou_value);
        std::cout << buf << "\n";
    }
    std::cout << "report written to " << out << "\n";
    return 0;
}

int cmd_render(const RunConfig& cfg, const std::string& checkpoint, const std::string& data,
               const std::string& split, int index, const std::string& spec_text,
               const std::string& out_prefix) {
    if (spec_text != "adverse") {
        try {
            parse_corruption(spec_text);
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--spec: ") + e.what());
        }
    }
    const Checkpoint ck = load_checkpoint(checkpoint);
    const FusionModel model = model_from_checkpoint(ck);
    const Dataset ds = Dataset::open(data);
    if (index < 0 || index >= ds.count(split))
        throw UsageError("--index " + std::to_string(index) + " out of range for split " + split +
                         " with " + std::to_string(ds.count(split)) + " samples");

    SensorSample s = to_sensor_sample(ds.load(split, index), ds.intrinsics(), cfg.densify_radius);
    if (spec_text == "adverse") {
        const auto assignments = build_adverse_eval_set(ds.count(split), cfg.eval_seed);
        s = apply_corruption(s, assignments[index].spec, assignments[index].seed);
    } else {
        s = apply_corruption(s, parse_corruption(spec_text),
                             derive_seed(cfg.eval_seed, 0xe7a1, static_cast<std::uint64_t>(index)));
    }
    const LabelMap pred = predict(model, s);

    write_ppm(out_prefix + "_input.ppm", s.camera);
    Tensor depth_vis({3, s.depth.h(), s.depth.w()});
    for (int y = 0; y < s.depth.h(); ++y)
        for (int x = 0; x < s.depth.w(); ++x)
            for (int c = 0; c < 3; ++c)
                depth_vis.at(c, y, x) = std::min(1.0, s.depth.at(y, x) * kMinDepth);
    write_ppm(out_prefix + "_depth.ppm", depth_vis);
    write_ppm(out_prefix + "_pred.ppm", colorize_labels(pred));
    write_ppm(out_prefix + "_gt.ppm", colorize_labels(s.labels));
    std::cout << "wrote " << out_prefix << "_{input,depth,pred,gt}.ppm\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    try {
        for (int i = 1; i + 1 < argc; ++i)
            if (std::strcmp(argv[i], "--config") == 0) cfg = load_run_config(argv[i + 1]);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"robust camera+lidar semantic segmentation at desk scale"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "key=value config file (flags override it)");

    std::string out, data, checkpoint, split = "val", spec = "clean";
    bool force = false;
    int index = 0;
    auto with_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file (flags override it)");
        return sub;
    };

    auto* gen = with_config(app.add_subcommand("gen-data", "generate a synthetic dataset"));
    gen->add_option("--out", out, "output dataset directory")->required();
    gen->add_option("--seed", cfg.data_seed, "dataset seed");
    gen->add_option("--train-n", cfg.train_n, "training sample count");
    gen->add_option("--val-n", cfg.val_n, "validation sample count");
    gen->add_flag("--force", force, "overwrite a non-empty output directory");

    auto* train_cmd = with_config(app.add_subcommand("train", "train a model"));
    train_cmd->add_option("--data", data, "dataset directory")->required();
    train_cmd->add_option("--arch", cfg.arch, "early|late|img-only|depth-only");
    train_cmd->add_option("--policy", cfg.policy, "slm|rlm");
    train_cmd->add_option("--iters", cfg.iters, "SGD iterations");
    train_cmd->add_option("--batch", cfg.batch, "batch size (gradient accumulation)");
    train_cmd->add_option("--seed", cfg.train_seed, "training seed");
    train_cmd->add_option("--out", out, "output run directory")->required();

    auto* eval_cmd = with_config(app.add_subcommand("eval", "evaluate a checkpoint under corruptions"));
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--data", data, "dataset directory")->required();
    eval_cmd->add_option("--specs", cfg.eval_specs,
                         "comma list: clean,fog:0.02,rain:2500:60,blackout:camera,adverse,...");
    eval_cmd->add_option("--seed", cfg.eval_seed, "evaluation seed");
    eval_cmd->add_option("--out", out, "report CSV path")->required();

    auto* render_cmd = with_config(app.add_subcommand("render", "render input/prediction/ground-truth images"));
    render_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    render_cmd->add_option("--data", data, "dataset directory")->required();
    render_cmd->add_option("--split", split, "train|val");
    render_cmd->add_option("--index", index, "sample index")->required();
    render_cmd->add_option("--spec", spec, "corruption spec or 'adverse'");
    render_cmd->add_option("--out", out, "output file prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(cfg, out, force);
        if (train_cmd->parsed()) return cmd_train(cfg, data, out);
        if (eval_cmd->parsed()) return cmd_eval(cfg, checkpoint, data, out);
        if (render_cmd->parsed()) return cmd_render(cfg, checkpoint, data, split, index, spec, out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
