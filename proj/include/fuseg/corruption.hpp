#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuseg/depth.hpp"
#include "fuseg/rng.hpp"
#include "fuseg/tensor.hpp"

namespace fuseg {

/// The two sensor streams fed to the networks, plus ground truth. Corruptions
/// modify camera/depth only; labels stay untouched and true_depth is read-only
/// (fog needs it).
struct SensorSample {
    Tensor camera;      // [3,H,W], raw values in [0,1]
    DepthImage depth;   // inverse depth, sentinel 0 = infinity
    LabelMap labels;
    Tensor true_depth;  // [1,H,W] meters
};

enum class Stream { camera, depth };

enum class CorruptionKind { clean, polygons, blackout, rain, fog, sun };

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::clean;
    Stream stream = Stream::camera;       // polygons, blackout
    int count = 3;                        // polygons, sun
    double area_lo = 0.03, area_hi = 0.14;  // polygons, fraction of image area
    int n_lines = 0;                      // rain
    int length = 1;                       // rain
    double brightness = 0.7;              // rain multiplier
    double beta = 0.0;                    // fog, 1/m
    double radius_lo = 0.05, radius_hi = 0.20;  // sun, fraction of image height
};

inline CorruptionSpec rain_light() { CorruptionSpec s; s.kind = CorruptionKind::rain; s.n_lines = 500; s.length = 10; return s; }
inline CorruptionSpec rain_moderate() { CorruptionSpec s; s.kind = CorruptionKind::rain; s.n_lines = 1500; s.length = 30; return s; }
inline CorruptionSpec rain_heavy() { CorruptionSpec s; s.kind = CorruptionKind::rain; s.n_lines = 2500; s.length = 60; return s; }

namespace corrupt_detail {

struct Vec2 {
    double x, y;
};

inline double polygon_area(const std::vector<Vec2>& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& u = p[i];
        const auto& v = p[(i + 1) % p.size()];
        a += u.x * v.y - v.x * u.y;
    }
    return std::fabs(a) / 2.0;
}

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns counter-clockwise hull.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    const std::size_t n = pts.size();
    std::vector<Vec2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

/// One random convex polygon with 3-8 vertices scaled to an exact target
/// area fraction, centered inside the middle band of the image.
inline std::vector<Vec2> random_convex_polygon(int h, int w, double area_frac, Rng& rng) {
    std::vector<Vec2> hull;
    do {
        const int k = rng.uniform_int(3, 8);
        std::vector<double> angles(k);
        for (auto& a : angles) a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        std::sort(angles.begin(), angles.end());
        std::vector<Vec2> pts(k);
        for (int i = 0; i < k; ++i) {
            const double r = rng.uniform(0.6, 1.0);
            pts[i] = {r * std::cos(angles[i]), r * std::sin(angles[i])};
        }
        hull = convex_hull(pts);
        // area >= 0.5 in unit space bounds the aspect ratio, so scaled
        // polygons never degenerate into sub-pixel slivers
    } while (hull.size() < 3 || polygon_area(hull) < 0.5);

    const double target = area_frac * h * w;
    const double scale = std::sqrt(target / polygon_area(hull));
    const double cx = rng.uniform(0.2, 0.8) * w;
    const double cy = rng.uniform(0.2, 0.8) * h;
    for (auto& p : hull) {
        p.x = cx + scale * p.x;
        p.y = cy + scale * p.y;
    }
    return hull;
}

/// Scanline fill over pixel centers; convex polygons yield one span per row.
template <typename SetPixel>
void fill_polygon(const std::vector<Vec2>& poly, int h, int w, SetPixel&& set) {
    for (int y = 0; y < h; ++y) {
        const double cy = y + 0.5;
        double xmin = 1e18, xmax = -1e18;
        bool any = false;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % poly.size()];
            if ((a.y <= cy) == (b.y <= cy)) continue;
            const double t = (cy - a.y) / (b.y - a.y);
            const double x = a.x + t * (b.x - a.x);
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            any = true;
        }
        if (!any) continue;
        const int x0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
        const int x1 = std::min(w - 1, static_cast<int>(std::floor(xmax - 0.5)));
        for (int x = x0; x <= x1; ++x) set(y, x);
    }
}

inline void saturate_pixel(SensorSample& s, Stream stream, int y, int x) {
    if (stream == Stream::camera) {
        s.camera.at(0, y, x) = 1.0;
        s.camera.at(1, y, x) = 1.0;
        s.camera.at(2, y, x) = 1.0;
    } else {
        s.depth.at(y, x) = 0.0;  // infinity sentinel
    }
}

}  // namespace corrupt_detail

/// Fills `count` random convex polygons with the stream's saturation value:
/// camera -> white, depth -> the infinity sentinel. Labels untouched.
inline SensorSample apply_polygons(SensorSample s, Stream stream, int count,
                                   double area_lo, double area_hi, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x9017));
    const int h = s.camera.dim(1), w = s.camera.dim(2);
    for (int i = 0; i < count; ++i) {
        const double frac = rng.uniform(area_lo, area_hi);
        const auto poly = corrupt_detail::random_convex_polygon(h, w, frac, rng);
        corrupt_detail::fill_polygon(poly, h, w, [&](int y, int x) {
            corrupt_detail::saturate_pixel(s, stream, y, x);
        });
    }
    return s;
}

inline SensorSample apply_polygons(SensorSample s, Stream stream, std::uint64_t seed) {
    CorruptionSpec d;
    return apply_polygons(std::move(s), stream, d.count, d.area_lo, d.area_hi, seed);
}

/// Total failure of one stream: depth -> all-sentinel (infinity), camera ->
/// saturated white. Idempotent.
inline SensorSample apply_blackout(SensorSample s, Stream stream) {
    if (stream == Stream::depth) {
        s.depth.values.fill(0.0);
    } else {
        s.camera.fill(1.0);
    }
    return s;
}

/// Darkens the camera by `brightness`, then draws n_lines one-pixel streaks of
/// value 0.9 whose shared slant is drawn once per image from [-60, -30]
/// degrees off vertical.
inline SensorSample apply_rain(SensorSample s, int n_lines, int length, double brightness,
                               std::uint64_t seed) {
    if (n_lines < 0) throw std::invalid_argument("apply_rain: n_lines must be >= 0");
    if (length < 1) throw std::invalid_argument("apply_rain: length must be >= 1");
    if (brightness <= 0.0 || brightness > 1.0)
        throw std::invalid_argument("apply_rain: brightness must be in (0,1]");
    Rng rng(derive_seed(seed, 0x4a19));
    for (double& v : s.camera.data) v *= brightness;
    const int h = s.camera.dim(1), w = s.camera.dim(2);
    const double deg = 3.14159265358979323846 / 180.0;
    const double slant = rng.uniform(-60.0 * deg, -30.0 * deg);
    const double dx = std::sin(slant), dy = std::cos(slant);
    for (int i = 0; i < n_lines; ++i) {
        const double ax = rng.uniform(0.0, static_cast<double>(w));
        const double ay = rng.uniform(0.0, static_cast<double>(h));
        for (int t = 0; t < length; ++t) {
            const int x = static_cast<int>(std::floor(ax + t * dx));
            const int y = static_cast<int>(std::floor(ay + t * dy));
            if (x < 0 || x >= w || y < 0 || y >= h) continue;
            s.camera.at(0, y, x) = 0.9;
            s.camera.at(1, y, x) = 0.9;
            s.camera.at(2, y, x) = 0.9;
        }
    }
    return s;
}

/// Attenuation-plus-airlight fog on the camera stream:
/// camera' = camera * exp(-beta d) + L (1 - exp(-beta d)), L = 0.8 gray.
/// The depth stream is untouched (lidar is assumed fog-free here).
inline SensorSample apply_fog(SensorSample s, double beta) {
    if (beta < 0.0) throw std::invalid_argument("apply_fog: beta must be >= 0");
    if (s.true_depth.numel() == 0) throw std::invalid_argument("apply_fog: missing true_depth");
    constexpr double kAirlight = 0.8;
    const int h = s.camera.dim(1), w = s.camera.dim(2);
    if (s.true_depth.dim(1) != h || s.true_depth.dim(2) != w)
        throw std::invalid_argument("apply_fog: true_depth extent mismatch");
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double t = std::exp(-beta * s.true_depth.at(0, y, x));
            for (int c = 0; c < 3; ++c)
                s.camera.at(c, y, x) = s.camera.at(c, y, x) * t + kAirlight * (1.0 - t);
        }
    return s;
}

/// White discs (radius drawn from [radius_lo, radius_hi] of the image height)
/// with a soft 2-pixel falloff; disc interiors read exactly 1.0.
inline SensorSample apply_blinding_sun(SensorSample s, int count, double radius_lo,
                                       double radius_hi, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("apply_blinding_sun: count must be >= 1");
    Rng rng(derive_seed(seed, 0x5019));
    const int h = s.camera.dim(1), w = s.camera.dim(2);
    for (int i = 0; i < count; ++i) {
        const double cx = rng.uniform(0.0, static_cast<double>(w));
        const double cy = rng.uniform(0.0, static_cast<double>(h));
        const double r = rng.uniform(radius_lo, radius_hi) * h;
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 3)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r + 3)));
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 3)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + r + 3)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                double alpha;
                if (d <= r) alpha = 1.0;
                else if (d <= r + 2.0) alpha = (r + 2.0 - d) / 2.0;
                else continue;
                for (int c = 0; c < 3; ++c)
                    s.camera.at(c, y, x) = s.camera.at(c, y, x) * (1.0 - alpha) + alpha;
            }
    }
    return s;
}

inline SensorSample apply_blinding_sun(SensorSample s, int count, std::uint64_t seed) {
    CorruptionSpec d;
    return apply_blinding_sun(std::move(s), count, d.radius_lo, d.radius_hi, seed);
}

/// Dispatch on a tagged spec; pure function of (sample, spec, seed).
inline SensorSample apply_corruption(SensorSample s, const CorruptionSpec& spec,
                                     std::uint64_t seed) {
    switch (spec.kind) {
        case CorruptionKind::clean:
            return s;
        case CorruptionKind::polygons:
            return apply_polygons(std::move(s), spec.stream, spec.count, spec.area_lo,
                                  spec.area_hi, seed);
        case CorruptionKind::blackout:
            return apply_blackout(std::move(s), spec.stream);
        case CorruptionKind::rain:
            return apply_rain(std::move(s), spec.n_lines, spec.length, spec.brightness, seed);
        case CorruptionKind::fog:
            return apply_fog(std::move(s), spec.beta);
        case CorruptionKind::sun:
            return apply_blinding_sun(std::move(s), spec.count, spec.radius_lo, spec.radius_hi,
                                      seed);
    }
    throw std::logic_error("apply_corruption: unreachable");
}

// ---------------------------------------------------------------------------
// Text form: clean | polygons:<stream>[:count] | blackout:<stream> |
// rain:<n>:<l> | fog:<beta> | sun:<count>
// ---------------------------------------------------------------------------

inline std::string to_string(Stream s) { return s == Stream::camera ? "camera" : "depth"; }

inline Stream parse_stream(const std::string& s) {
    if (s == "camera") return Stream::camera;
    if (s == "depth") return Stream::depth;
    throw std::invalid_argument("unknown stream '" + s + "' (want camera|depth)");
}

inline std::string format_corruption(const CorruptionSpec& c) {
    char buf[64];
    switch (c.kind) {
        case CorruptionKind::clean:
            return "clean";
        case CorruptionKind::polygons:
            return "polygons:" + to_string(c.stream) + ":" + std::to_string(c.count);
        case CorruptionKind::blackout:
            return "blackout:" + to_string(c.stream);
        case CorruptionKind::rain:
            return "rain:" + std::to_string(c.n_lines) + ":" + std::to_string(c.length);
        case CorruptionKind::fog:
            std::snprintf(buf, sizeof(buf), "fog:%g", c.beta);
            return buf;
        case CorruptionKind::sun:
            return "sun:" + std::to_string(c.count);
    }
    throw std::logic_error("format_corruption: unreachable");
}

inline CorruptionSpec parse_corruption(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto colon = text.find(':', pos);
        if (colon == std::string::npos) {
            parts.push_back(text.substr(pos));
            break;
        }
        parts.push_back(text.substr(pos, colon - pos));
        pos = colon + 1;
    }
    CorruptionSpec c;
    const std::string& kind = parts[0];
    auto want = [&](std::size_t lo, std::size_t hi) {
        if (parts.size() < lo || parts.size() > hi)
            throw std::invalid_argument("bad corruption spec '" + text + "'");
    };
    try {
        if (kind == "clean") {
            want(1, 1);
            c.kind = CorruptionKind::clean;
        } else if (kind == "polygons") {
            want(2, 3);
            c.kind = CorruptionKind::polygons;
            c.stream = parse_stream(parts[1]);
            if (parts.size() == 3) c.count = std::stoi(parts[2]);
            if (c.count < 0) throw std::invalid_argument("negative polygon count");
        } else if (kind == "blackout") {
            want(2, 2);
            c.kind = CorruptionKind::blackout;
            c.stream = parse_stream(parts[1]);
        } else if (kind == "rain") {
            want(3, 3);
            c.kind = CorruptionKind::rain;
            c.n_lines = std::stoi(parts[1]);
            c.length = std::stoi(parts[2]);
            if (c.n_lines < 0 || c.length < 1) throw std::invalid_argument("bad rain params");
        } else if (kind == "fog") {
            want(2, 2);
            c.kind = CorruptionKind::fog;
            c.beta = std::stod(parts[1]);
            if (c.beta < 0) throw std::invalid_argument("negative beta");
        } else if (kind == "sun") {
            want(2, 2);
            c.kind = CorruptionKind::sun;
            c.count = std::stoi(parts[1]);
            if (c.count < 1) throw std::invalid_argument("sun count must be >= 1");
        } else {
            throw std::invalid_argument("unknown corruption '" + kind + "'");
        }
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad corruption spec '" + text + "'");
    }
    return c;
}

}  // namespace fuseg
