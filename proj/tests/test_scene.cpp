#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fuseg/depth.hpp"
#include "fuseg/scene.hpp"

using namespace fuseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fuseg_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

bool samples_equal(const Sample& a, const Sample& b) {
    if (a.image.data != b.image.data) return false;
    if (a.labels.v != b.labels.v) return false;
    if (a.true_depth.data != b.true_depth.data) return false;
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].x != b.points[i].x || a.points[i].y != b.points[i].y ||
            a.points[i].z != b.points[i].z)
            return false;
    return true;
}

TEST(SceneGen, DeterministicInSeedAndIndex) {
    SceneSpec spec;
    spec.seed = 1234;
    EXPECT_TRUE(samples_equal(generate_scene(spec, 5), generate_scene(spec, 5)));
    EXPECT_FALSE(samples_equal(generate_scene(spec, 5), generate_scene(spec, 6)));
    SceneSpec other = spec;
    other.seed = 4321;
    EXPECT_FALSE(samples_equal(generate_scene(spec, 5), generate_scene(other, 5)));
}

TEST(SceneGen, CenteredCarProjectsToAnalyticRegion) {
    // One car, front face at z = 10, x in [-0.9, 0.9], y in [0.1, 1.5].
    scene_detail::SceneModel m;
    m.road_half = 3.0;
    m.illum = 0.0;
    scene_detail::Box car{};
    car.x0 = -0.9; car.x1 = 0.9;
    car.y0 = kCameraHeight - 1.4; car.y1 = kCameraHeight;
    car.z0 = 10.0; car.z1 = 13.5;
    car.cls = kCar;
    car.objid = 0;
    car.r = 0.7; car.g = 0.2; car.b = 0.2;
    m.boxes.push_back(car);

    SceneSpec spec;
    const auto k = spec.intrinsics();
    Sample s = render_scene(m, k);

    // Analytic pinhole projection of the front-face corners:
    // u in 48 +- 48*0.9/10 = [43.68, 52.32]; v in 24 + 48*[0.01, 0.15] = [24.48, 31.2]
    int car_pixels = 0;
    for (int y = 0; y < k.image_h; ++y)
        for (int x = 0; x < k.image_w; ++x) {
            if (s.labels.at(y, x) == kCar) {
                ++car_pixels;
                EXPECT_NEAR(s.true_depth.at(0, y, x), 10.0, 1e-9);
                EXPECT_GE(x + 0.5, 43.68 - 1.0);
                EXPECT_LE(x + 0.5, 52.32 + 1.0);
                EXPECT_GE(y + 0.5, 24.48 - 1.0);
                EXPECT_LE(y + 0.5, 31.2 + 1.0);
            }
        }
    // interior of the projected box must be fully car-labeled
    for (int y = 25; y <= 30; ++y)
        for (int x = 44; x <= 51; ++x) EXPECT_EQ(s.labels.at(y, x), kCar) << y << "," << x;
    EXPECT_GT(car_pixels, 40);
}

TEST(SceneGen, LidarUsesSixteenElevationRows) {
    SceneSpec spec;
    spec.seed = 99;
    const auto k = spec.intrinsics();
    std::set<int> rows;
    for (int idx = 0; idx < 5; ++idx) {
        Sample s = generate_scene(spec, idx);
        for (const auto& p : s.points)
            rows.insert(static_cast<int>(std::floor(k.v_of(p.y, p.z))));
    }
    EXPECT_LE(rows.size(), static_cast<std::size_t>(kLidarRows));
    EXPECT_GE(rows.size(), static_cast<std::size_t>(kLidarRows) - 2);
}

TEST(SceneGen, LidarPointsAgreeWithTrueDepth) {
    SceneSpec spec;
    spec.seed = 31337;
    const auto k = spec.intrinsics();
    for (int idx = 0; idx < 10; ++idx) {
        Sample s = generate_scene(spec, idx);
        EXPECT_FALSE(s.points.empty());
        for (const auto& p : s.points) {
            EXPECT_GT(p.z, 0.0);
            const int col = static_cast<int>(std::floor(k.u_of(p.x, p.z)));
            const int row = static_cast<int>(std::floor(k.v_of(p.y, p.z)));
            ASSERT_GE(col, 0);
            ASSERT_LT(col, k.image_w);
            ASSERT_GE(row, 0);
            ASSERT_LT(row, k.image_h);
            const double td = s.true_depth.at(0, row, col);
            EXPECT_NEAR(p.z, td, 0.02 * td) << "at pixel " << row << "," << col;
        }
    }
}

TEST(SceneGen, LidarDensityInTargetBand) {
    SceneSpec spec;
    spec.seed = 555;
    const auto k = spec.intrinsics();
    double total_frac = 0.0;
    for (int idx = 0; idx < 20; ++idx) {
        Sample s = generate_scene(spec, idx);
        SparseDepth sd = project_points(s.points, k);
        int occ = 0;
        for (double r : sd.range) occ += r > 0.0;
        total_frac += static_cast<double>(occ) / (k.image_h * k.image_w);
    }
    const double mean_frac = total_frac / 20.0;
    EXPECT_GE(mean_frac, 0.08);
    EXPECT_LE(mean_frac, 0.15);
}

TEST(SceneGen, SkyAndRoadDepthStructure) {
    SceneSpec spec;
    spec.seed = 2024;
    for (int idx = 0; idx < 5; ++idx) {
        Sample s = generate_scene(spec, idx);
        const int horizon = spec.image_h / 2;
        for (int y = 0; y < spec.image_h; ++y)
            for (int x = 0; x < spec.image_w; ++x) {
                const double d = s.true_depth.at(0, y, x);
                if (s.labels.at(y, x) == kBackground && y < horizon && d == kDepthCap) {
                    // sky pixel: cap is the sentinel
                    continue;
                }
                EXPECT_GT(d, 0.0);
                EXPECT_LE(d, kDepthCap);
            }
        // road depth decreases monotonically away from the horizon in every column
        for (int x = 0; x < spec.image_w; ++x) {
            double prev = 1e18;
            for (int y = horizon; y < spec.image_h; ++y) {
                if (s.labels.at(y, x) != kRoad) continue;
                const double d = s.true_depth.at(0, y, x);
                EXPECT_LT(d, prev);
                prev = d;
            }
        }
        // sky exists and carries the cap
        bool saw_sky = false;
        for (int x = 0; x < spec.image_w; ++x)
            if (s.labels.at(0, x) == kBackground && s.true_depth.at(0, 0, x) == kDepthCap)
                saw_sky = true;
        EXPECT_TRUE(saw_sky);
    }
}

TEST(SceneGen, ClassPresenceAuditOver200Samples) {
    SceneSpec spec;
    spec.seed = 7;  // default dataset seed
    int present[kNumClasses] = {};
    for (int idx = 0; idx < 200; ++idx) {
        Sample s = generate_scene(spec, idx);
        bool seen[kNumClasses] = {};
        for (auto v : s.labels.v) seen[v] = true;
        for (int c = 0; c < kNumClasses; ++c) present[c] += seen[c];
    }
    for (int c = 0; c < kNumClasses; ++c)
        EXPECT_GE(present[c], 40) << "class " << c << " present in only " << present[c] << "/200";
}

TEST(SceneGen, DensifiedDepthRoundTripOnSceneData) {
    SceneSpec spec;
    spec.seed = 11;
    const auto k = spec.intrinsics();
    Sample s = generate_scene(spec, 3);
    SparseDepth sd = project_points(s.points, k);
    DepthImage di = densify(sd, kDefaultDensifyRadius);
    for (int y = 0; y < k.image_h; ++y)
        for (int x = 0; x < k.image_w; ++x) {
            if (sd.occupied(y, x)) {
                EXPECT_DOUBLE_EQ(di.at(y, x), 1.0 / sd.at(y, x));
            } else if (di.at(y, x) > 0.0) {
                double lo = 1e18, hi = -1e18;
                for (int ny = std::max(0, y - kDefaultDensifyRadius);
                     ny <= std::min(k.image_h - 1, y + kDefaultDensifyRadius); ++ny)
                    for (int nx = std::max(0, x - kDefaultDensifyRadius);
                         nx <= std::min(k.image_w - 1, x + kDefaultDensifyRadius); ++nx)
                        if (sd.occupied(ny, nx)) {
                            lo = std::min(lo, 1.0 / sd.at(ny, nx));
                            hi = std::max(hi, 1.0 / sd.at(ny, nx));
                        }
                EXPECT_GE(di.at(y, x), lo - 1e-12);
                EXPECT_LE(di.at(y, x), hi + 1e-12);
            }
        }
}

TEST(Dataset, BuildWriteReadRoundTrip) {
    const auto dir = fresh_dir("dataset_roundtrip");
    SceneSpec spec;
    spec.seed = 42;
    build_dataset(spec, 3, 2, dir);

    Dataset ds = Dataset::open(dir);
    EXPECT_EQ(ds.count("train"), 3);
    EXPECT_EQ(ds.count("val"), 2);
    EXPECT_EQ(ds.manifest.spec.seed, 42u);

    Sample orig = generate_scene(spec, split_index("val", 1));
    Sample loaded = ds.load("val", 1);
    EXPECT_EQ(loaded.labels.v, orig.labels.v);
    EXPECT_EQ(loaded.true_depth.data, orig.true_depth.data);
    // image goes through 8-bit quantization
    for (std::size_t i = 0; i < orig.image.data.size(); ++i)
        EXPECT_NEAR(loaded.image.data[i], orig.image.data[i], 0.5 / 255.0 + 1e-12);
    ASSERT_EQ(loaded.points.size(), orig.points.size());
    for (std::size_t i = 0; i < orig.points.size(); ++i)
        EXPECT_NEAR(loaded.points[i].z, orig.points[i].z, 5e-7);

    EXPECT_THROW(ds.load("val", 2), std::out_of_range);
    fs::remove_all(dir);
}

TEST(Dataset, RebuildIsByteIdentical) {
    const auto a = fresh_dir("dataset_bytes_a");
    const auto b = fresh_dir("dataset_bytes_b");
    SceneSpec spec;
    spec.seed = 77;
    build_dataset(spec, 2, 1, a);
    build_dataset(spec, 2, 1, b);

    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        std::ifstream fa(entry.path(), std::ios::binary);
        std::ifstream fb(b / rel, std::ios::binary);
        ASSERT_TRUE(fb) << rel;
        std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        EXPECT_EQ(ca, cb) << rel;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

}  // namespace
