// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dualpix {

/// Dense tensor with an explicit shape, row-major.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor &o) const { return shape == o.shape; }
};

/// Stack of C planes of H x W (C x H x W tensor view used by the network).
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : channels(c), height(h), width(w), data(c * h * w, fill) {}

    double &at(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * height + y) * width + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * height + y) * width + x];
    }
};

FeatureMap to_feature_map(const Image &image);
Grid to_grid(const FeatureMap &map); // single-channel map

struct Conv2d {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    Tensor weight; // out x in x k x k
    Tensor bias;   // out

    Conv2d() = default;
    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t s);

    std::size_t padding() const { return kernel / 2; }
    FeatureMap forward(const FeatureMap &x) const;
    /// Accumulates into grad_weight/grad_bias; returns d loss / d x.
    FeatureMap backward(const FeatureMap &x, const FeatureMap &grad_out, Tensor &grad_weight,
                        Tensor &grad_bias) const;
};

inline constexpr double kLeakySlope = 0.05;

/// Encoder-decoder with a skip connection and two inverse-depth heads:
///   conv 7x7x16 /2 -> lrelu -> conv 3x3x32 /2 -> lrelu -> conv 3x3x32 -> lrelu
///   -> nearest x2, concat conv1 features -> conv 3x3x16 -> lrelu -> head (1/2)
///   conv3 features -> head (1/4)
/// Heads pass through 0.5 (1 + tanh(z)) so outputs lie in (0, 1).
class MicroNet {
  public:
    static constexpr std::size_t kInputChannels = 5;
    static constexpr std::size_t kScales = 2;

    MicroNet();

    void initialize(std::uint64_t seed);
    void zero();

    struct Cache {
        std::uint64_t version = 0;
        FeatureMap input, a1, h1, a2, h2, a3, h3, cat, a4, h4, z_half, z_quarter;
        std::array<Grid, kScales> outputs; // half, quarter resolution
    };

    Cache forward(const FeatureMap &input) const;

    struct Gradients {
        std::vector<Tensor> params; // aligned with parameters()
        FeatureMap input;
    };
    /// Exact reverse-mode gradients given d loss / d output for each scale.
    /// Throws Error if the parameters changed since `cache` was produced.
    Gradients backward(const Cache &cache, const std::array<Grid, kScales> &upstream) const;

    std::vector<Tensor *> parameters();
    std::vector<const Tensor *> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::size_t parameter_count() const;

    /// Call after changing parameters so older caches are rejected.
    void mark_updated() { ++version_; }
    std::uint64_t version() const { return version_; }

  private:
    Conv2d conv1_, conv2_, conv3_, conv4_, head_half_, head_quarter_;
    std::uint64_t version_ = 1;
};

} // namespace dualpix
