// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/camera.hpp"
#include "dualpix/core.hpp"
#include "dualpix/optics.hpp"

#include <array>
#include <optional>
#include <vector>

namespace dualpix {

/// Fronto-parallel textured plane at `depth_m` in the reference camera frame.
/// The texture is centred on the reference image and may be larger than it;
/// mask values >= 0.5 are opaque, a missing mask means fully opaque.
struct SceneLayer {
    Image texture;
    double depth_m = 1.0;
    std::optional<Grid> mask;
};

/// Layers are listed back to front with strictly decreasing depth. The first
/// layer is the background and must be fully opaque.
struct LayeredScene {
    std::size_t height = 0;
    std::size_t width = 0;
    DepthRange range;
    std::vector<SceneLayer> layers;

    void validate() const;
};

struct DualPixelPair {
    Image left;
    Image right;
};

struct Capture {
    Image center; // all-in-focus reference view
    DualPixelPair dp;
    Grid full_aperture; // light collected by both halves, left + right
    std::array<Image, 4> neighbors; // top, bottom, left, right
    InverseDepthMap depth;
    Grid confidence;
    Grid layer_index; // front-most layer per reference pixel
};

/// Renders the five rig views and the reference dual-pixel pair. Neighbours
/// are pinhole projections; the dual-pixel views blur each layer with a
/// horizontal half box of width |d| where d = A + B / Z is the layer disparity
/// in pixels, so the two views are displaced by d and sum to a centred box of
/// width 2|d|.
Capture render_capture(const LayeredScene &scene, const Rig &rig, const ThinLensParams &lens);

/// Pinhole rendering of a single rig view, used for neighbours and tests.
Image render_view(const LayeredScene &scene, const CameraModel &reference,
                  const CameraModel &view, Grid *layer_index = nullptr);

/// Discrete weights of a unit-area box covering [lo, hi] (pixels), integrated
/// against the linear-interpolation tent so sub-pixel boxes shift the image by
/// their centroid. Returns (first_offset, weights).
std::pair<int, std::vector<double>> box_kernel(double lo, double hi);

/// Horizontal 1-D convolution with replicate padding.
Grid convolve_rows(const Grid &src, int first_offset, const std::vector<double> &weights);

} // namespace dualpix
