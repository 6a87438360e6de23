// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"

namespace dualpix {

/// Minimum weighted variance sum(C (pred - mean)^2) accepted by the fits.
inline constexpr double kDegenerateVariance = 1e-12;

/// Weighted least-squares fit target ~ a * pred + b. Pixels with zero weight
/// are ignored. Throws SingularFitError on zero total weight or a (weighted)
/// constant prediction.
AffineMap fit_affine(const Grid &pred, const Grid &target, const Grid &weight);

/// Same fit with b fixed at 0.
AffineMap fit_scale(const Grid &pred, const Grid &target, const Grid &weight);

/// Affine fit together with d a / d pred and d b / d pred, obtained by
/// differentiating the 2x2 normal equations N [a b]^T = r implicitly.
struct DifferentiableFit {
    AffineMap map;
    Grid da; // d a / d pred(x, y)
    Grid db; // d b / d pred(x, y), zero in scale-only mode
};

DifferentiableFit fit_affine_differentiable(const Grid &pred, const Grid &target,
                                            const Grid &weight);
DifferentiableFit fit_scale_differentiable(const Grid &pred, const Grid &target,
                                           const Grid &weight);

/// Numerically stable log(1 + exp(x)).
double softplus(double x);
double sigmoid(double x);

} // namespace dualpix
