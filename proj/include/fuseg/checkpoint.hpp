#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fuseg/image_io.hpp"
#include "fuseg/model.hpp"

namespace fuseg {

// Checkpoint file: a text manifest (key=value config echo, then one
// `tensor <name> <d0>x<d1>x...` line per parameter in serialization order,
// then `end`), followed by the flat little-endian doubles of every tensor in
// manifest order.

inline void save_checkpoint(const std::filesystem::path& path, const FusionModel& model,
                            const std::map<std::string, std::string>& config_echo) {
    auto f = detail::open_out(path);
    f << "fuseg-checkpoint-v1\n";
    const auto& cfg = model.config();
    f << "arch=" << to_string(cfg.arch) << "\n";
    f << "num_classes=" << cfg.num_classes << "\n";
    f << "width_full=" << cfg.width_full << "\n";
    f << "width_mid=" << cfg.width_mid << "\n";
    f << "width_low=" << cfg.width_low << "\n";
    f << "cff_width=" << cfg.cff_width << "\n";
    for (const auto& [k, v] : config_echo) {
        if (k == "arch" || k == "num_classes" || k.rfind("width_", 0) == 0 || k == "cff_width")
            continue;  // model config owns these keys
        f << k << "=" << v << "\n";
    }
    for (const auto& p : model.params()) {
        f << "tensor " << p.name;
        for (std::size_t i = 0; i < p.value().shape.size(); ++i)
            f << (i == 0 ? ' ' : 'x') << p.value().shape[i];
        f << "\n";
    }
    f << "end\n";
    for (const auto& p : model.params())
        f.write(reinterpret_cast<const char*>(p.value().data.data()),
                static_cast<std::streamsize>(p.value().data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path.string());
}

struct Checkpoint {
    ModelConfig config;
    std::map<std::string, std::string> manifest;  // every key=value line
    std::vector<std::pair<std::string, Tensor>> tensors;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    auto f = detail::open_in(path);
    std::string line;
    if (!std::getline(f, line) || line != "fuseg-checkpoint-v1")
        throw std::runtime_error("not a fuseg checkpoint: " + path.string());

    Checkpoint ck;
    std::vector<std::pair<std::string, std::vector<int>>> described;
    while (std::getline(f, line)) {
        if (line == "end") break;
        if (line.rfind("tensor ", 0) == 0) {
            const auto name_end = line.find(' ', 7);
            if (name_end == std::string::npos)
                throw std::runtime_error("checkpoint: bad tensor line '" + line + "'");
            const std::string name = line.substr(7, name_end - 7);
            std::vector<int> shape;
            std::string dims = line.substr(name_end + 1);
            std::size_t pos = 0;
            while (pos <= dims.size()) {
                const auto x = dims.find('x', pos);
                const std::string tok =
                    x == std::string::npos ? dims.substr(pos) : dims.substr(pos, x - pos);
                shape.push_back(std::stoi(tok));
                if (x == std::string::npos) break;
                pos = x + 1;
            }
            described.emplace_back(name, std::move(shape));
        } else {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("checkpoint: bad manifest line '" + line + "'");
            ck.manifest[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    if (line != "end") throw std::runtime_error("checkpoint: missing end marker");

    auto need = [&](const char* key) {
        const auto it = ck.manifest.find(key);
        if (it == ck.manifest.end())
            throw std::runtime_error(std::string("checkpoint: missing key ") + key);
        return it->second;
    };
    ck.config.arch = parse_arch(need("arch"));
    ck.config.num_classes = std::stoi(need("num_classes"));
    ck.config.width_full = std::stoi(need("width_full"));
    ck.config.width_mid = std::stoi(need("width_mid"));
    ck.config.width_low = std::stoi(need("width_low"));
    ck.config.cff_width = std::stoi(need("cff_width"));

    for (auto& [name, shape] : described) {
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated tensor data");
        ck.tensors.emplace_back(name, std::move(t));
    }
    return ck;
}

/// Rebuilds the model a checkpoint describes; throws on any name/shape
/// mismatch between the manifest and the architecture.
inline FusionModel model_from_checkpoint(const Checkpoint& ck) {
    FusionModel model(ck.config, 0);
    auto& params = model.params();
    if (params.size() != ck.tensors.size())
        throw std::runtime_error("checkpoint/config mismatch: parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != ck.tensors[i].first)
            throw std::runtime_error("checkpoint/config mismatch: expected parameter '" +
                                     params[i].name + "', found '" + ck.tensors[i].first + "'");
        if (params[i].value().shape != ck.tensors[i].second.shape)
            throw std::runtime_error("checkpoint/config mismatch: shape of " + params[i].name);
        params[i].value() = ck.tensors[i].second;
    }
    return model;
}

}  // namespace fuseg
