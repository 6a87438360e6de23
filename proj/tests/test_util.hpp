// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"
#include "dualpix/dataset.hpp"
#include "dualpix/render.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace dualpix::testutil {

inline Grid random_grid(std::size_t h, std::size_t w, std::mt19937_64 &rng, double lo = 0.0,
                        double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Grid g(h, w);
    for (double &v : g.values()) {
        v = u(rng);
    }
    return g;
}

inline Image random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64 &rng) {
    std::vector<Grid> planes;
    for (std::size_t i = 0; i < c; ++i) {
        planes.push_back(random_grid(h, w, rng));
    }
    return Image(std::move(planes));
}

/// Smooth texture: sum of a few random sinusoids mapped into [0.1, 0.9].
inline Image smooth_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Grid> planes;
    for (std::size_t ch = 0; ch < c; ++ch) {
        Grid g(h, w);
        double fx[3], fy[3], ph[3];
        for (int k = 0; k < 3; ++k) {
            fx[k] = 0.05 + 0.35 * u(rng);
            fy[k] = 0.05 + 0.35 * u(rng);
            ph[k] = 6.283 * u(rng);
        }
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) {
                    s += std::sin(fx[k] * static_cast<double>(x) + fy[k] * static_cast<double>(y) +
                                  ph[k]);
                }
                g(y, x) = 0.5 + 0.4 * s / 3.0;
            }
        }
        planes.push_back(std::move(g));
    }
    return Image(std::move(planes));
}

/// Scratch directory unique to the running test, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("dualpix_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    const std::filesystem::path &path() const { return path_; }

  private:
    std::filesystem::path path_;
};

/// Owning copy, safe to iterate when `g` is a temporary.
inline std::vector<double> values_of(const Grid &g) {
    return {g.values().begin(), g.values().end()};
}

inline double max_abs_diff(const Grid &a, const Grid &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

inline double max_abs_diff(const Image &a, const Image &b) {
    double m = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        m = std::max(m, max_abs_diff(a.channel(c), b.channel(c)));
    }
    return m;
}

/// A small random capture rendered from the default random scene family.
inline CaptureData small_capture(std::uint64_t seed, std::size_t size = 32) {
    std::mt19937_64 rng(seed);
    RandomSceneConfig cfg;
    cfg.size = size;
    cfg.focal_px = static_cast<double>(size);
    const SceneSpec spec = random_scene(cfg, rng);
    return to_capture_data(render_capture(spec.scene, spec.rig, spec.lens), spec);
}

} // namespace dualpix::testutil
