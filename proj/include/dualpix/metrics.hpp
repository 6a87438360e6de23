// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"

#include <string>
#include <vector>

namespace dualpix {

inline constexpr int kIrlsIterations = 5;
inline constexpr double kIrlsResidualFloor = 1e-8;

/// L1 affine fit by iteratively reweighted least squares, started from the
/// weighted L2 fit. `objective` holds the weighted mean absolute residual
/// after the initial fit and after every iteration.
struct IrlsFit {
    AffineMap map;
    std::vector<double> objective;
};
IrlsFit irls_l1_fit(const Grid &pred, const Grid &target, const Grid &confidence,
                    int iterations = kIrlsIterations);

/// Affine-invariant weighted error:
/// min_{a,b} (sum C |D* - (a pred + b)|^p / sum C)^(1/p) for p in {1, 2}.
double aiwe(const Grid &pred, const Grid &target, const Grid &confidence, int p);

/// Confidence-weighted Spearman correlation of average ranks, reported as
/// 1 - |rho|.
double weighted_spearman(const Grid &pred, const Grid &target, const Grid &confidence);

/// Weighted percentile of the values with positive weight, interpolating
/// linearly between order statistics placed at (S_k - w_k) / (W - w_n).
double weighted_percentile(const Grid &values, const Grid &weights, double q);

/// Weighted RMSE after mapping pred onto target through the affine map that
/// sends pred's weighted 1/3 and 2/3 percentiles to those of target.
double percentile_affine_wrmse(const Grid &pred, const Grid &target, const Grid &confidence);

struct MetricsRecord {
    double aiwe1 = 0.0;
    double aiwe2 = 0.0;
    double one_minus_rho = 0.0;
    double pct_wrmse = 0.0;
    double geometric_mean = 0.0; // cube root of aiwe1 * aiwe2 * one_minus_rho

    std::string to_json() const;
};

/// Fraction of each dimension kept by the evaluation crop (384/504 = 512/672).
inline constexpr double kDefaultCropFraction = 384.0 / 504.0;

struct CropBox {
    std::size_t y0, x0, height, width;
};
CropBox center_crop_box(std::size_t height, std::size_t width, double fraction);

MetricsRecord center_crop_eval(const Grid &pred, const Grid &target, const Grid &confidence,
                               double fraction = kDefaultCropFraction);

} // namespace dualpix
