// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/camera.hpp"
#include "dualpix/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dualpix {

/// Metric depths of n fronto-parallel planes, uniformly spaced in inverse
/// depth from z_near (k = 0) to z_far (k = n - 1).
std::vector<double> plane_depths(std::size_t n, const DepthRange &range);

/// Plane k's normalized inverse depth, 1 - k / (n - 1); equals
/// metric_to_normalized_inverse(plane_depths(n)[k]).
double plane_to_normalized(std::size_t k, std::size_t n);

/// Pixel-major cost volume: cost(y, x, k) is contiguous in k. Invalid
/// entries hold +infinity.
class CostVolume {
  public:
    CostVolume() = default;
    CostVolume(std::size_t height, std::size_t width, std::vector<double> depths);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t planes() const { return depths_.size(); }
    const std::vector<double> &depths() const { return depths_; }

    double &operator()(std::size_t y, std::size_t x, std::size_t k) {
        return costs_[(y * width_ + x) * depths_.size() + k];
    }
    double operator()(std::size_t y, std::size_t x, std::size_t k) const {
        return costs_[(y * width_ + x) * depths_.size() + k];
    }
    std::span<double> pixel(std::size_t y, std::size_t x) {
        return {costs_.data() + (y * width_ + x) * depths_.size(), depths_.size()};
    }
    std::span<const double> pixel(std::size_t y, std::size_t x) const {
        return {costs_.data() + (y * width_ + x) * depths_.size(), depths_.size()};
    }

    friend bool operator==(const CostVolume &, const CostVolume &) = default;

  private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> depths_;
    std::vector<double> costs_;
};

struct StereoView {
    const Image *image;
    CameraModel camera;
};

/// Plane-sweep SAD cost volume. For every plane each neighbour is warped into
/// the reference; the per-neighbour cost is the RGB sum of absolute
/// differences and the plane cost is the sum of the two smallest valid
/// neighbour costs (+inf with fewer than two).
CostVolume sweep_cost_volume(const Image &reference, const CameraModel &reference_camera,
                             std::span<const StereoView> neighbors,
                             const std::vector<double> &depths);

struct BilateralParams {
    double sigma_spatial = 3.0;
    double sigma_range = 12.5; // guide intensities on a [0, 255] scale
    int radius = 9;
};

/// Cross-bilateral aggregation of every plane slice guided by a grayscale
/// image in [0, 1]. Infinite costs are left out of the normalisation; a
/// pixel whose whole window is infinite stays infinite.
CostVolume guided_bilateral_filter(const CostVolume &volume, const Grid &guide,
                                   const BilateralParams &params = {});

struct PlaneDepth {
    InverseDepthMap depth;
    std::vector<std::uint8_t> invalid; // 1 where every plane cost is infinite
    Grid plane_index;
};

/// Winner-take-all plane per pixel, ties resolved towards the nearer plane.
PlaneDepth argmin_depth(const CostVolume &volume, const DepthRange &range);

inline constexpr double kConsistencySigma = 1.0 / 256.0;

/// Left/right consistency: C_j = exp(-(D_ref - D_j(warp))^2 / (2 sigma^2))
/// with invalid warps scoring 0; the result is the product of the two
/// largest C_j.
Grid lr_consistency_confidence(const InverseDepthMap &reference_depth,
                               const CameraModel &reference_camera,
                               std::span<const Grid> neighbor_depths,
                               std::span<const CameraModel> neighbor_cameras,
                               double sigma = kConsistencySigma);

struct GroundTruthConfig {
    std::size_t planes = 64;
    std::size_t downscale = 1; // per dimension, power of two
    BilateralParams bilateral;
};

struct GroundTruthReport {
    double coverage = 0.0;            // fraction of pixels with confidence > 0.5
    double mean_confidence = 0.0;
    double textureless_fraction = 0.0; // 19x19 variance below 1e-4
    bool low_texture = false;
    std::size_t invalid_pixels = 0;
    double runtime_s = 0.0;

    std::string to_json() const;
};

struct GroundTruth {
    InverseDepthMap depth;
    Grid confidence;
    GroundTruthReport report;
};

/// Sweep, filter and select depth for the reference and each neighbour (every
/// view against its four counterparts), then score reference confidence.
/// `views` are ordered as the rig (center, top, bottom, left, right).
GroundTruth ground_truth_pipeline(const std::array<Image, 5> &views, const Rig &rig,
                                  const DepthRange &range, const GroundTruthConfig &config = {});

/// Local variance of a grayscale image over a (2r+1)^2 window.
Grid local_variance(const Grid &gray, int radius);

} // namespace dualpix
