// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"

#include <cstdint>
#include <vector>

namespace dualpix {

struct PhotometricConfig {
    double dssim_weight = 0.8;
    double charbonnier_weight = 0.2;
    int ssim_window = 3;
    double ssim_c1 = 0.01 * 0.01;
    double ssim_c2 = 0.03 * 0.03;
    double charbonnier_alpha = 1.0;
    double charbonnier_c = 0.1;

    void validate() const;
};

/// Robust penalty sqrt((x/c)^2 + 1) - 1 and its derivative.
double charbonnier(double x, double c = 0.1);
double charbonnier_derivative(double x, double c = 0.1);

/// Per-pixel (1 - SSIM) / 2 averaged over channels, with a uniform window and
/// reflection padding.
Grid dssim(const Image &p0, const Image &p1, const PhotometricConfig &cfg = {});

/// Gradient of sum(upstream * dssim(p0, p1)) with respect to p1.
std::vector<Grid> dssim_backward(const Image &p0, const Image &p1, const Grid &upstream,
                                 const PhotometricConfig &cfg = {});

struct PhotometricDelta {
    Grid delta; // +inf at invalid pixels
    std::size_t valid_count = 0;
    bool zero_coverage = false;

    /// Mean over valid pixels; 0 when nothing is valid.
    double mean() const;
};

/// Weighted DSSIM + Charbonnier difference between i0 and i1.
PhotometricDelta photometric_delta(const Image &i0, const Image &i1,
                                   const std::vector<std::uint8_t> &valid,
                                   const PhotometricConfig &cfg = {});

/// Gradient of sum(upstream * delta) with respect to i1 (finite part only;
/// callers put zero upstream at invalid pixels).
std::vector<Grid> photometric_delta_backward(const Image &i0, const Image &i1,
                                             const Grid &upstream,
                                             const PhotometricConfig &cfg = {});

} // namespace dualpix
