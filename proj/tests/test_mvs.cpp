// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/camera.hpp"
#include "dualpix/metrics.hpp"
#include "dualpix/mvs.hpp"
#include "dualpix/render.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

using namespace dualpix;

namespace {

const DepthRange kRange;

TEST(PlaneDepths, EndpointsAndOracle) {
    const auto z = plane_depths(256, kRange);
    ASSERT_EQ(z.size(), 256u);
    EXPECT_NEAR(z.front(), 0.2, 1e-15);
    EXPECT_NEAR(z.back(), 100.0, 1e-9);
    EXPECT_NEAR(z[127], 0.397648, 1e-6);
    EXPECT_NEAR(1.0 / z[127], 5.0 - 127.0 / 255.0 * 4.99, 1e-12);
    EXPECT_THROW(plane_depths(1, kRange), DomainError);
}

TEST(PlaneDepths, UniformInverseSpacing) {
    const auto z = plane_depths(64, kRange);
    const double step = (1.0 / z[0] - 1.0 / z[63]) / 63.0;
    for (std::size_t k = 1; k < z.size(); ++k) {
        EXPECT_LT(std::abs((1.0 / z[k - 1] - 1.0 / z[k]) - step), 1e-12);
    }
}

struct SweepScene {
    Capture capture;
    Rig rig;
    std::vector<double> depths;
    std::size_t plane = 0;
};

SweepScene single_plane(std::size_t n, std::size_t planes, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SweepScene s;
    s.depths = plane_depths(planes, kRange);
    s.plane = k;
    s.rig = make_plus_rig(n, n, static_cast<double>(n), 0.05);
    const std::size_t tw = n + 64;
    LayeredScene scene{n, n, kRange,
                       {SceneLayer{testutil::random_image(tw, tw, 3, rng), s.depths[k], std::nullopt}}};
    s.capture = render_capture(scene, s.rig, ThinLensParams(0.002, 0.004, 1.0, 187500.0));
    return s;
}

std::vector<StereoView> stereo_views(const Capture &c, const Rig &rig) {
    std::vector<StereoView> v;
    for (std::size_t j = 0; j < 4; ++j) {
        v.push_back({&c.neighbors[j], rig[j + 1]});
    }
    return v;
}

TEST(Sweep, TruePlaneWinsOnTexturedPixels) {
    const std::size_t n = 48;
    const SweepScene s = single_plane(n, 32, 5, 1);
    const auto views = stereo_views(s.capture, s.rig);
    const CostVolume vol = sweep_cost_volume(s.capture.center, s.rig[0], views, s.depths);
    std::size_t hits = 0;
    std::size_t total = 0;
    for (std::size_t y = 8; y + 8 < n; ++y) {
        for (std::size_t x = 8; x + 8 < n; ++x) {
            const auto costs = vol.pixel(y, x);
            ++total;
            hits += std::all_of(costs.begin(), costs.end(),
                                [&](double c) { return costs[s.plane] <= c; });
        }
    }
    EXPECT_GE(static_cast<double>(hits), 0.99 * static_cast<double>(total));
}

TEST(Sweep, ConstantImagesHaveZeroCost) {
    const Image flat(16, 16, 3, 0.3);
    const Rig rig = make_plus_rig(16, 16, 16.0, 0.05);
    std::vector<StereoView> views;
    for (std::size_t j = 0; j < 4; ++j) {
        views.push_back({&flat, rig[j + 1]});
    }
    const CostVolume vol = sweep_cost_volume(flat, rig[0], views, plane_depths(8, kRange));
    for (std::size_t y = 0; y < 16; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            for (double c : vol.pixel(y, x)) {
                EXPECT_TRUE(c == 0.0 || std::isinf(c));
            }
        }
    }
    EXPECT_EQ(vol(8, 8, 3), 0.0);
}

TEST(Sweep, NeighbourOrderDoesNotMatter) {
    const SweepScene s = single_plane(24, 12, 3, 2);
    auto views = stereo_views(s.capture, s.rig);
    const CostVolume a = sweep_cost_volume(s.capture.center, s.rig[0], views, s.depths);
    std::swap(views[0], views[3]);
    std::swap(views[1], views[2]);
    const CostVolume b = sweep_cost_volume(s.capture.center, s.rig[0], views, s.depths);
    EXPECT_EQ(a, b);
}

CostVolume random_volume(std::size_t h, std::size_t w, std::size_t planes, std::mt19937_64 &rng) {
    CostVolume v(h, w, plane_depths(planes, kRange));
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (double &c : v.pixel(y, x)) {
                c = u(rng);
            }
        }
    }
    return v;
}

TEST(Bilateral, ConstantInputsAreUnchanged) {
    CostVolume v(12, 12, plane_depths(3, kRange));
    for (std::size_t y = 0; y < 12; ++y) {
        for (std::size_t x = 0; x < 12; ++x) {
            v(y, x, 0) = 1.5;
            v(y, x, 1) = 0.25;
            v(y, x, 2) = 7.0;
        }
    }
    const CostVolume f = guided_bilateral_filter(v, Grid(12, 12, 0.4));
    for (std::size_t y = 0; y < 12; ++y) {
        for (std::size_t x = 0; x < 12; ++x) {
            EXPECT_NEAR(f(y, x, 0), 1.5, 1e-13);
            EXPECT_NEAR(f(y, x, 1), 0.25, 1e-13);
            EXPECT_NEAR(f(y, x, 2), 7.0, 1e-13);
        }
    }
}

TEST(Bilateral, ConstantGuideIsGaussianBlur) {
    std::mt19937_64 rng(3);
    const std::size_t n = 25;
    const CostVolume v = random_volume(n, n, 2, rng);
    const CostVolume f = guided_bilateral_filter(v, Grid(n, n, 0.7));
    // separable Gaussian, truncated at radius 9 and renormalised over the image
    const int r = 9;
    for (std::size_t k = 0; k < 2; ++k) {
        for (int y = 0; y < static_cast<int>(n); ++y) {
            for (int x = 0; x < static_cast<int>(n); ++x) {
                double acc = 0.0;
                double norm = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= static_cast<int>(n)) {
                        continue;
                    }
                    const double wy = std::exp(-dy * dy / 18.0);
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= static_cast<int>(n)) {
                            continue;
                        }
                        const double wgt = wy * std::exp(-dx * dx / 18.0);
                        acc += wgt * v(yy, xx, k);
                        norm += wgt;
                    }
                }
                EXPECT_NEAR(f(y, x, k), acc / norm, 1e-10);
            }
        }
    }
}

TEST(Bilateral, StepEdgeBlocksLeakage) {
    const std::size_t n = 20;
    CostVolume v(n, n, plane_depths(2, kRange));
    Grid guide(n, n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const bool right = x >= n / 2;
            guide(y, x) = right ? 200.0 / 255.0 : 0.0;
            v(y, x, 0) = right ? 100.0 : 0.0;
            v(y, x, 1) = 1.0;
        }
    }
    const CostVolume f = guided_bilateral_filter(v, guide);
    for (std::size_t y = 0; y < n; ++y) {
        EXPECT_LT(f(y, n / 2 - 1, 0), 1.0); // < 1% of the step
        EXPECT_GT(f(y, n / 2, 0), 99.0);
    }
}

TEST(Bilateral, SentinelsExcludedFromNormalisation) {
    CostVolume v(5, 5, plane_depths(2, kRange));
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t x = 0; x < 5; ++x) {
            v(y, x, 0) = (x + y) % 2 ? std::numeric_limits<double>::infinity() : 2.0;
            v(y, x, 1) = std::numeric_limits<double>::infinity();
        }
    }
    const CostVolume f = guided_bilateral_filter(v, Grid(5, 5, 0.5));
    EXPECT_NEAR(f(2, 2, 0), 2.0, 1e-13);
    EXPECT_NEAR(f(2, 3, 0), 2.0, 1e-13);
    EXPECT_TRUE(std::isinf(f(2, 2, 1)));
}

TEST(Argmin, TiesGoToNearerPlaneAndSentinelsFlagged) {
    CostVolume v(1, 3, plane_depths(4, kRange));
    const double inf = std::numeric_limits<double>::infinity();
    const double costs[3][4] = {{3, 1, 1, 2}, {0.5, 2, 3, 0.1}, {inf, inf, inf, inf}};
    for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t k = 0; k < 4; ++k) {
            v(0, x, k) = costs[x][k];
        }
    }
    const PlaneDepth d = argmin_depth(v, kRange);
    EXPECT_EQ(d.plane_index[0], 1.0);
    EXPECT_EQ(d.plane_index[1], 3.0);
    EXPECT_NEAR(d.depth.grid[0], plane_to_normalized(1, 4), 1e-15);
    EXPECT_NEAR(d.depth.grid[1], 0.0, 1e-15);
    EXPECT_EQ(d.invalid[0], 0);
    EXPECT_EQ(d.invalid[2], 1);
    EXPECT_EQ(d.depth.grid[2], 0.0);
}

TEST(Consistency, ExamplesAndSymmetry) {
    const CameraModel cam(10, 10, 3.5, 3.5);
    const Grid ref(8, 8, 0.5);
    const InverseDepthMap dref{ref, kRange};
    const std::vector<CameraModel> cams(4, cam);
    std::vector<Grid> agree(4, ref);
    for (double v : testutil::values_of(lr_consistency_confidence(dref, cam, agree, cams))) {
        EXPECT_NEAR(v, 1.0, 1e-15);
    }
    std::vector<Grid> off = {Grid(8, 8, 0.5 + 1.0 / 256.0), Grid(8, 8, 0.5 - 1.0 / 256.0),
                             Grid(8, 8, 0.9), Grid(8, 8, 0.1)};
    const Grid c = lr_consistency_confidence(dref, cam, off, cams);
    for (double v : c.values()) {
        EXPECT_NEAR(v, 0.367879, 1e-6);
        EXPECT_NEAR(v, std::exp(-1.0), 1e-12);
    }
    std::vector<Grid> shuffled = {off[2], off[1], off[3], off[0]};
    EXPECT_EQ(lr_consistency_confidence(dref, cam, shuffled, cams), c);

    // Only one neighbour sees the scene: the second factor is zero.
    std::vector<CameraModel> away(4, CameraModel(10, 10, 3.5, 3.5, Eigen::Matrix3d::Identity(),
                                                 Eigen::Vector3d(0, 0, -1e3)));
    away[0] = cam;
    for (double v : testutil::values_of(lr_consistency_confidence(dref, cam, agree, away))) {
        EXPECT_EQ(v, 0.0);
    }
}

std::array<Image, 5> views_of(const Capture &c) {
    return {c.center, c.neighbors[0], c.neighbors[1], c.neighbors[2], c.neighbors[3]};
}

TEST(Pipeline, SinglePlaneRecoveredOnTexturedPixels) {
    const std::size_t n = 48;
    const std::size_t planes = 32;
    const SweepScene s = single_plane(n, planes, 6, 4);
    GroundTruthConfig cfg;
    cfg.planes = planes;
    const GroundTruth gt = ground_truth_pipeline(views_of(s.capture), s.rig, kRange, cfg);
    const Grid var = local_variance(to_gray(s.capture.center), 9);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < gt.depth.grid.size(); ++i) {
        if (var[i] <= 1e-4) {
            continue;
        }
        ++checked;
        const double k = (1.0 - gt.depth.grid[i]) * static_cast<double>(planes - 1);
        EXPECT_LE(std::abs(k - static_cast<double>(s.plane)), 1.0 + 1e-9) << i;
    }
    EXPECT_GT(checked, n * n / 2);
    EXPECT_FALSE(gt.report.low_texture);
}

TEST(Pipeline, DeterministicAndReportsTexturelessScenes) {
    const Image flat(16, 16, 3, 0.5);
    const Rig rig = make_plus_rig(16, 16, 16.0, 0.05);
    GroundTruthConfig cfg;
    cfg.planes = 8;
    const GroundTruth a = ground_truth_pipeline({flat, flat, flat, flat, flat}, rig, kRange, cfg);
    EXPECT_TRUE(a.report.low_texture);
    EXPECT_GT(a.report.textureless_fraction, 0.99);
    const auto j = nlohmann::json::parse(a.report.to_json());
    EXPECT_TRUE(j.contains("coverage"));

    const SweepScene s = single_plane(24, 8, 2, 5);
    const GroundTruth b1 = ground_truth_pipeline(views_of(s.capture), s.rig, kRange, cfg);
    const GroundTruth b2 = ground_truth_pipeline(views_of(s.capture), s.rig, kRange, cfg);
    EXPECT_EQ(b1.depth.grid, b2.depth.grid);
    EXPECT_EQ(b1.confidence, b2.confidence);
}

} // namespace
