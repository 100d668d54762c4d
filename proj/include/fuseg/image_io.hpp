#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuseg/tensor.hpp"

namespace fuseg {

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = true) {
    std::ifstream f(p, binary ? std::ios::binary : std::ios::in);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    return f;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = true) {
    std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

inline void read_pnm_header(std::ifstream& f, const char* magic, int& w, int& h) {
    std::string m;
    int maxval = 0;
    f >> m >> w >> h >> maxval;
    if (m != magic || maxval != 255 || w <= 0 || h <= 0)
        throw std::runtime_error("bad PNM header (expected " + std::string(magic) + ")");
    f.get();  // single whitespace byte before raster
}

}  // namespace detail

/// 8-bit P6 image. Values are clamped to [0,1] and rounded.
inline void write_ppm(const std::filesystem::path& p, const Tensor& image) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("write_ppm: image must be [3,H,W]");
    const int h = image.dim(1), w = image.dim(2);
    auto f = detail::open_out(p);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = image.at(c, y, x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

inline Tensor read_ppm(const std::filesystem::path& p) {
    auto f = detail::open_in(p);
    int w = 0, h = 0;
    detail::read_pnm_header(f, "P6", w, h);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw std::runtime_error("truncated PPM: " + p.string());
    Tensor img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return img;
}

inline void write_pgm(const std::filesystem::path& p, const LabelMap& labels) {
    auto f = detail::open_out(p);
    f << "P5\n" << labels.w << " " << labels.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(labels.v.data()),
            static_cast<std::streamsize>(labels.v.size()));
}

inline LabelMap read_pgm(const std::filesystem::path& p) {
    auto f = detail::open_in(p);
    int w = 0, h = 0;
    detail::read_pnm_header(f, "P5", w, h);
    LabelMap m(h, w);
    f.read(reinterpret_cast<char*>(m.v.data()), static_cast<std::streamsize>(m.v.size()));
    if (!f) throw std::runtime_error("truncated PGM: " + p.string());
    return m;
}

// Raw little-endian doubles, row-major. The build targets little-endian hosts.
static_assert(std::endian::native == std::endian::little,
              "checkpoint/depth binary formats assume a little-endian host");

inline void write_doubles(const std::filesystem::path& p, const std::vector<double>& v) {
    auto f = detail::open_out(p);
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(const std::filesystem::path& p, std::size_t count) {
    auto f = detail::open_in(p);
    std::vector<double> v(count);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw std::runtime_error("truncated binary file: " + p.string());
    return v;
}

struct Point3 {
    double x, y, z;
};

inline void write_points_csv(const std::filesystem::path& p, const std::vector<Point3>& pts) {
    auto f = detail::open_out(p, false);
    char buf[96];
    for (const auto& q : pts) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", q.x, q.y, q.z);
        f << buf;
    }
}

inline std::vector<Point3> read_points_csv(const std::filesystem::path& p) {
    auto f = detail::open_in(p, false);
    std::vector<Point3> pts;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        Point3 q{};
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &q.x, &q.y, &q.z) != 3)
            throw std::runtime_error("bad points.csv line: " + line);
        pts.push_back(q);
    }
    return pts;
}

}  // namespace fuseg
