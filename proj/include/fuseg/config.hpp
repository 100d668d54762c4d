#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "fuseg/image_io.hpp"

namespace fuseg {

/// Every tunable default in one place. A plain key=value config file can
/// override any field; CLI flags override the file. Unknown keys are
/// rejected. The effective config is echoed into every output artifact.
struct RunConfig {
    // dataset
    int image_h = 48, image_w = 96;
    int train_n = 200, val_n = 50;
    std::uint64_t data_seed = 7;
    // model
    std::string arch = "late";
    int width_full = 16, width_mid = 24, width_low = 32, cff_width = 32;
    // training
    std::string policy = "slm";
    int iters = 3000, batch = 2;
    double base_lr = 0.001, momentum = 0.9, weight_decay = 0.0001, lr_power = 0.9;
    std::uint64_t train_seed = 1;
    double resize_lo = 0.5, resize_hi = 2.0, flip_prob = 0.5;
    int polygon_count = 3;
    // preprocessing
    int densify_radius = 4;
    // evaluation
    std::uint64_t eval_seed = 5;
    std::string eval_specs = "clean,adverse";

    void set(const std::string& key, const std::string& value) {
        try {
            if (key == "image_h") image_h = std::stoi(value);
            else if (key == "image_w") image_w = std::stoi(value);
            else if (key == "train_n") train_n = std::stoi(value);
            else if (key == "val_n") val_n = std::stoi(value);
            else if (key == "data_seed") data_seed = std::stoull(value);
            else if (key == "arch") arch = value;
            else if (key == "width_full") width_full = std::stoi(value);
            else if (key == "width_mid") width_mid = std::stoi(value);
            else if (key == "width_low") width_low = std::stoi(value);
            else if (key == "cff_width") cff_width = std::stoi(value);
            else if (key == "policy") policy = value;
            else if (key == "iters") iters = std::stoi(value);
            else if (key == "batch") batch = std::stoi(value);
            else if (key == "base_lr") base_lr = std::stod(value);
            else if (key == "momentum") momentum = std::stod(value);
            else if (key == "weight_decay") weight_decay = std::stod(value);
            else if (key == "lr_power") lr_power = std::stod(value);
            else if (key == "train_seed") train_seed = std::stoull(value);
            else if (key == "resize_lo") resize_lo = std::stod(value);
            else if (key == "resize_hi") resize_hi = std::stod(value);
            else if (key == "flip_prob") flip_prob = std::stod(value);
            else if (key == "polygon_count") polygon_count = std::stoi(value);
            else if (key == "densify_radius") densify_radius = std::stoi(value);
            else if (key == "eval_seed") eval_seed = std::stoull(value);
            else if (key == "eval_specs") eval_specs = value;
            else throw std::invalid_argument("unknown config key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("bad value for config key '" + key + "': " + value);
        }
    }

    std::map<std::string, std::string> to_map() const {
        auto d = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return std::string(buf);
        };
        return {
            {"image_h", std::to_string(image_h)},
            {"image_w", std::to_string(image_w)},
            {"train_n", std::to_string(train_n)},
            {"val_n", std::to_string(val_n)},
            {"data_seed", std::to_string(data_seed)},
            {"arch", arch},
            {"width_full", std::to_string(width_full)},
            {"width_mid", std::to_string(width_mid)},
            {"width_low", std::to_string(width_low)},
            {"cff_width", std::to_string(cff_width)},
            {"policy", policy},
            {"iters", std::to_string(iters)},
            {"batch", std::to_string(batch)},
            {"base_lr", d(base_lr)},
            {"momentum", d(momentum)},
            {"weight_decay", d(weight_decay)},
            {"lr_power", d(lr_power)},
            {"train_seed", std::to_string(train_seed)},
            {"resize_lo", d(resize_lo)},
            {"resize_hi", d(resize_hi)},
            {"flip_prob", d(flip_prob)},
            {"polygon_count", std::to_string(polygon_count)},
            {"densify_radius", std::to_string(densify_radius)},
            {"eval_seed", std::to_string(eval_seed)},
            {"eval_specs", eval_specs},
        };
    }
};

/// key=value per line; blank lines and '#' comments allowed; unknown keys are
/// an error.
inline RunConfig load_run_config(const std::filesystem::path& path) {
    auto f = detail::open_in(path, false);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
        line = line.substr(start);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                        ": expected key=value, got '" + line + "'");
        cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

}  // namespace fuseg
