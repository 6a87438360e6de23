// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/camera.hpp"
#include "dualpix/render.hpp"
#include "dualpix/warp.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace dualpix;

namespace {

const DepthRange kRange;

Grid constant_depth(std::size_t h, std::size_t w, double z) {
    return Grid(h, w, metric_to_normalized_inverse(z, kRange));
}

TEST(Warp, IdentityPoseIsIdentityWarp) {
    std::mt19937_64 rng(1);
    const CameraModel cam(20, 20, 7.5, 5.5);
    const Grid d = testutil::random_grid(12, 16, rng, 0.05, 0.9);
    const WarpField w = induced_warp(d, kRange, cam, cam);
    for (std::size_t y = 0; y < 12; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            EXPECT_NEAR(w.x(y, x), static_cast<double>(x), 1e-12);
            EXPECT_NEAR(w.y(y, x), static_cast<double>(y), 1e-12);
        }
    }
    const Image src = testutil::random_image(12, 16, 3, rng);
    // Exact reproduction: identity warps sample on the grid.
    WarpField exact = w;
    for (std::size_t y = 0; y < 12; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            exact.x(y, x) = static_cast<double>(x);
            exact.y(y, x) = static_cast<double>(y);
        }
    }
    EXPECT_EQ(bilinear_sample(src, exact).image, src);
}

TEST(Warp, PureBaselineShift) {
    const double f = 30.0;
    const double tx = 0.04;
    const CameraModel c0(f, f, 9.5, 9.5);
    const CameraModel c1(f, f, 9.5, 9.5, Eigen::Matrix3d::Identity(), Eigen::Vector3d(tx, 0, 0));
    for (double z : {0.5, 1.3, 7.0}) {
        const WarpField w = induced_warp(constant_depth(20, 20, z), kRange, c0, c1);
        for (std::size_t y = 0; y < 20; y += 3) {
            for (std::size_t x = 0; x < 20; x += 3) {
                EXPECT_NEAR(w.x(y, x), static_cast<double>(x) + f * tx / z, 1e-9);
                EXPECT_NEAR(w.y(y, x), static_cast<double>(y), 1e-9);
            }
        }
    }
}

TEST(Warp, PointBehindTargetIsInvalid) {
    const CameraModel c0(10, 10, 4.5, 4.5);
    const CameraModel c1(10, 10, 4.5, 4.5, Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -5));
    const WarpField w = induced_warp(constant_depth(10, 10, 1.0), kRange, c0, c1);
    for (auto v : w.valid) {
        EXPECT_EQ(v, 0);
    }
}

TEST(Warp, BilinearHandValues) {
    Grid src(1, 2, std::vector<double>{0.0, 1.0});
    WarpField w{Grid(1, 1, 0.5), Grid(1, 1, 0.0), {1}};
    EXPECT_DOUBLE_EQ(bilinear_sample(src, w)[0], 0.5);

    Grid big(8, 8);
    for (std::size_t i = 0; i < big.size(); ++i) {
        big[i] = static_cast<double>(i);
    }
    Image im({big});
    WarpField out{Grid(1, 1, -3.2), Grid(1, 1, 5.0), {1}};
    const SampledImage s = bilinear_sample(im, out);
    EXPECT_DOUBLE_EQ(s.image(0, 0, 0), big(5, 0));
    EXPECT_EQ(s.valid[0], 1); // sampling clamps; validity comes from the warp field
}

TEST(Warp, GradientVanishesForConstantSourceOrZeroUpstream) {
    std::mt19937_64 rng(3);
    const Rig rig = make_plus_rig(16, 16, 16.0, 0.05);
    const Grid d = testutil::random_grid(16, 16, rng, 0.1, 0.6);
    const Image flat(16, 16, 3, 0.4);
    std::vector<Grid> up(3, testutil::random_grid(16, 16, rng));
    const Grid g1 = warp_depth_gradient(flat, d, kRange, rig[0], rig[4], up);
    for (double v : g1.values()) {
        EXPECT_EQ(v, 0.0);
    }
    const Image tex = testutil::smooth_image(16, 16, 3, rng);
    const std::vector<Grid> zero(3, Grid(16, 16));
    const Grid g2 = warp_depth_gradient(tex, d, kRange, rig[0], rig[4], zero);
    for (double v : g2.values()) {
        EXPECT_EQ(v, 0.0);
    }
}

// Central differences of sum(upstream * sample(src, warp(D))) per pixel.
TEST(Warp, DepthGradientMatchesFiniteDifferences) {
    const double h = 1e-4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n = 16;
        const Rig rig = make_plus_rig(n, n, 16.0, 0.1);
        const Image src = testutil::smooth_image(n, n, 3, rng);
        const Grid d = testutil::random_grid(n, n, rng, 0.2, 0.6);
        std::vector<Grid> up;
        for (int c = 0; c < 3; ++c) {
            up.push_back(testutil::random_grid(n, n, rng, -1.0, 1.0));
        }
        const std::size_t view = 1 + seed % 4;
        const Grid g = warp_depth_gradient(src, d, kRange, rig[0], rig[view], up);
        auto objective = [&](const Grid &depth, std::size_t i) {
            const SampledImage s = bilinear_sample(src, induced_warp(depth, kRange, rig[0], rig[view]));
            double v = 0.0;
            for (int c = 0; c < 3; ++c) {
                v += up[c][i] * s.image.channel(c)[i];
            }
            return v;
        };
        const WarpField w0 = induced_warp(d, kRange, rig[0], rig[view]);
        std::size_t checked = 0;
        std::size_t ok = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!w0.valid[i]) {
                continue;
            }
            Grid dp = d;
            Grid dm = d;
            dp[i] += h;
            dm[i] -= h;
            const double numeric = (objective(dp, i) - objective(dm, i)) / (2.0 * h);
            const double err = std::abs(numeric - g[i]) / std::max({std::abs(numeric), std::abs(g[i]), 1e-6});
            ++checked;
            ok += err < 1e-4;
        }
        ASSERT_GT(checked, 0u);
        EXPECT_GE(static_cast<double>(ok), 0.99 * static_cast<double>(checked)) << "seed " << seed;
    }
}

TEST(Warp, CompositionMatchesRenderedNeighbour) {
    const std::size_t n = 40;
    const std::size_t tw = n + 40;
    // Low-frequency texture keeps bilinear interpolation error small.
    Image tex(tw, tw, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < tw; ++y) {
            for (std::size_t x = 0; x < tw; ++x) {
                tex(c, y, x) = 0.5 + 0.3 * std::sin(0.11 * static_cast<double>(x) + 0.7 * c) *
                                         std::cos(0.07 * static_cast<double>(y));
            }
        }
    }
    const double z = 1.2;
    LayeredScene scene{n, n, kRange, {SceneLayer{tex, z, std::nullopt}}};
    const Rig rig = make_plus_rig(n, n, 40.0, 0.05);
    const Capture cap = render_capture(scene, rig, ThinLensParams(0.002, 0.004, 1.2, 187500.0));
    for (std::size_t j = 0; j < 4; ++j) {
        const WarpField w = induced_warp(constant_depth(n, n, z), kRange, rig[0], rig[j + 1]);
        const SampledImage s = bilinear_sample(cap.neighbors[j], w);
        double worst = 0.0;
        for (std::size_t y = 4; y + 4 < n; ++y) {
            for (std::size_t x = 4; x + 4 < n; ++x) {
                const std::size_t i = y * n + x;
                if (!s.valid[i]) {
                    continue;
                }
                for (std::size_t c = 0; c < 3; ++c) {
                    worst = std::max(worst, std::abs(s.image(c, y, x) - cap.center(c, y, x)));
                }
            }
        }
        EXPECT_LT(worst, 2e-3) << "neighbour " << j;
    }
}

} // namespace
