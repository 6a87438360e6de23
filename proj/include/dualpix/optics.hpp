// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/core.hpp"

namespace dualpix {

/// Thin-lens camera: aperture diameter, focal length and focus distance in
/// metres, plus the blur-to-disparity gain in pixels per metre of blur.
struct ThinLensParams {
    double aperture = 0.0;
    double focal_length = 0.0;
    double focus_distance = 0.0;
    double disparity_gain = 1.0;

    ThinLensParams() = default;
    ThinLensParams(double aperture_m, double focal_length_m, double focus_distance_m,
                   double gain_px_per_m);
};

/// Image-wide constants of the dual-pixel disparity d = A + B / Z.
struct DisparityCoeffs {
    double A = 0.0; // pixels
    double B = 0.0; // pixels * metres

    double disparity(double z) const { return A + B / z; }
};

/// Signed blur diameter on the sensor (metres): L f (Z - g) / (Z (g - f)).
/// Positive behind the focal plane, zero at Z = g.
double signed_blur_size(double z, const ThinLensParams &lens);

DisparityCoeffs affine_coeffs(const ThinLensParams &lens);

/// Dual-pixel disparity in pixels, alpha * signed_blur_size.
inline double dp_disparity(double z, const ThinLensParams &lens) {
    return lens.disparity_gain * signed_blur_size(z, lens);
}

/// Depth under lens2 that produces the same disparity as depth z1 under lens1.
/// Throws DomainError when no positive depth exists.
double equivalent_scene_depth(double z1, const ThinLensParams &lens1, const ThinLensParams &lens2);

/// Per-pixel version; the error message names the first infeasible pixel.
Grid equivalent_scene_depth(const Grid &z1, const ThinLensParams &lens1,
                            const ThinLensParams &lens2);

} // namespace dualpix
