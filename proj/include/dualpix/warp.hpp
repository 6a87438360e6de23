// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/camera.hpp"
#include "dualpix/core.hpp"

#include <cstdint>
#include <vector>

namespace dualpix {

/// Per-pixel source coordinates of the depth-induced mapping from the
/// reference camera into another camera. `valid` is 0 where the point lies
/// behind either camera or projects outside [0, W-1] x [0, H-1].
struct WarpField {
    Grid x;
    Grid y;
    std::vector<std::uint8_t> valid;

    std::size_t height() const { return x.height(); }
    std::size_t width() const { return x.width(); }
};

/// Derivatives of the warped coordinates with respect to normalized inverse depth.
struct WarpJacobian {
    Grid dx;
    Grid dy;
};

/// Maps reference pixels into `target` using normalized inverse depth
/// `depth` (values outside [0, 1] are allowed; non-positive metric inverse
/// depth is flagged invalid). The source image is assumed to share the
/// reference resolution.
WarpField induced_warp(const Grid &depth, const DepthRange &range, const CameraModel &reference,
                       const CameraModel &target, WarpJacobian *jacobian = nullptr);

inline WarpField induced_warp(const InverseDepthMap &depth, const CameraModel &reference,
                              const CameraModel &target) {
    return induced_warp(depth.grid, depth.range, reference, target);
}

struct SampledImage {
    Image image;
    std::vector<std::uint8_t> valid;
};

/// Bilinear lookup of `src` at the warp coordinates, clamped to the image.
SampledImage bilinear_sample(const Image &src, const WarpField &warp);
Grid bilinear_sample(const Grid &src, const WarpField &warp);

/// Spatial derivatives of the bilinear interpolant at the warp coordinates.
/// Integer coordinates use the right-limit cell.
void bilinear_gradient(const Grid &src, const WarpField &warp, Grid &d_dx, Grid &d_dy);

/// Chain rule of sum(upstream * bilinear_sample(src, induced_warp(depth)))
/// with respect to depth. Invalid pixels receive zero gradient.
Grid warp_depth_gradient(const Image &src, const Grid &depth, const DepthRange &range,
                         const CameraModel &reference, const CameraModel &target,
                         const std::vector<Grid> &upstream);

} // namespace dualpix
