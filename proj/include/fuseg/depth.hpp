#pragma once

#include <cmath>
#include <vector>

#include "fuseg/camera.hpp"
#include "fuseg/tensor.hpp"

namespace fuseg {

constexpr double kMinDepth = 0.5;        // meters; nearer returns are discarded
constexpr int kDefaultDensifyRadius = 4; // Chebyshev neighborhood

/// Per-pixel nearest lidar range; 0 marks pixels without a return.
struct SparseDepth {
    int h = 0, w = 0;
    std::vector<double> range;

    SparseDepth() = default;
    SparseDepth(int h_, int w_) : h(h_), w(w_), range(static_cast<std::size_t>(h_) * w_, 0.0) {}

    double& at(int y, int x) { return range[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return range[static_cast<std::size_t>(y) * w + x]; }
    bool occupied(int y, int x) const { return at(y, x) > 0.0; }
};

/// Dense inverse-depth image (1/meters). The sentinel 0 encodes
/// infinity / no lidar return; values lie in [0, 1/kMinDepth].
struct DepthImage {
    Tensor values;  // [1,H,W]

    DepthImage() = default;
    DepthImage(int h, int w) : values({1, h, w}) {}
    explicit DepthImage(Tensor t) : values(std::move(t)) {}

    int h() const { return values.dim(1); }
    int w() const { return values.dim(2); }
    double& at(int y, int x) { return values.at(0, y, x); }
    double at(int y, int x) const { return values.at(0, y, x); }
};

/// Projects lidar points onto the image plane. Points behind the camera
/// (z <= min_depth) or outside the field of view are discarded; pixel
/// assignment floors the continuous coordinates; collisions keep the
/// smallest range (nearest surface wins).
inline SparseDepth project_points(const std::vector<Point3>& points,
                                  const CameraIntrinsics& k, double min_depth = kMinDepth) {
    SparseDepth sd(k.image_h, k.image_w);
    for (const auto& p : points) {
        if (p.z <= min_depth) continue;
        const int col = static_cast<int>(std::floor(k.u_of(p.x, p.z)));
        const int row = static_cast<int>(std::floor(k.v_of(p.y, p.z)));
        if (col < 0 || col >= k.image_w || row < 0 || row >= k.image_h) continue;
        double& cell = sd.at(row, col);
        if (cell == 0.0 || p.z < cell) cell = p.z;
    }
    return sd;
}

/// Fills empty pixels with the inverse-distance-weighted mean of occupied
/// pixels within a Chebyshev radius, working in inverse-depth space
/// (weight 1/(1 + euclidean pixel distance)). Pixels with no occupied
/// neighbor get the infinity sentinel 0. Occupied pixels keep 1/range.
inline DepthImage densify(const SparseDepth& sparse, int radius = kDefaultDensifyRadius) {
    if (radius < 1) throw std::invalid_argument("densify: radius must be >= 1");
    DepthImage out(sparse.h, sparse.w);
    for (int y = 0; y < sparse.h; ++y)
        for (int x = 0; x < sparse.w; ++x) {
            if (sparse.occupied(y, x)) {
                out.at(y, x) = 1.0 / sparse.at(y, x);
                continue;
            }
            double wsum = 0.0, acc = 0.0;
            const int y0 = std::max(0, y - radius), y1 = std::min(sparse.h - 1, y + radius);
            const int x0 = std::max(0, x - radius), x1 = std::min(sparse.w - 1, x + radius);
            for (int ny = y0; ny <= y1; ++ny)
                for (int nx = x0; nx <= x1; ++nx) {
                    const double r = sparse.at(ny, nx);
                    if (r <= 0.0) continue;
                    const double dy = ny - y, dx = nx - x;
                    const double wgt = 1.0 / (1.0 + std::sqrt(dy * dy + dx * dx));
                    wsum += wgt;
                    acc += wgt / r;
                }
            out.at(y, x) = wsum > 0.0 ? acc / wsum : 0.0;
        }
    return out;
}

/// Subtracts the per-channel mean of this image, removing global
/// illumination offsets. Idempotent.
inline Tensor normalize_image(const Tensor& image) {
    if (image.ndim() != 3) throw std::invalid_argument("normalize_image: expected [C,H,W]");
    Tensor out = image;
    const int c = image.dim(0);
    const std::size_t plane = static_cast<std::size_t>(image.dim(1)) * image.dim(2);
    for (int ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        const std::size_t off = static_cast<std::size_t>(ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += out.data[off + i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) out.data[off + i] -= mean;
    }
    return out;
}

}  // namespace fuseg
