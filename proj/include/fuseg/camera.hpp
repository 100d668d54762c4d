#pragma once

#include <cmath>
#include <stdexcept>

#include "fuseg/image_io.hpp"

namespace fuseg {

// Depth convention: everywhere in this project "depth"/"range" is the camera
// z coordinate (the disparity-style planar depth), not euclidean distance.
// x points right, y points down, z forward.
struct CameraIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int image_h = 0, image_w = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
        if (cx < 0 || cx > image_w || cy < 0 || cy > image_h)
            throw std::invalid_argument("intrinsics: principal point outside the image");
    }

    // Continuous image coordinates of a 3D point (z > 0 assumed).
    double u_of(double x, double z) const { return cx + fx * x / z; }
    double v_of(double y, double z) const { return cy + fy * y / z; }

    // Ray direction through the center of pixel (col, row), z-normalized so
    // that a point at parameter t has depth exactly t.
    Point3 pixel_ray(int col, int row) const {
        return {(col + 0.5 - cx) / fx, (row + 0.5 - cy) / fy, 1.0};
    }
};

}  // namespace fuseg
