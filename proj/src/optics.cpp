// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/optics.hpp"

#include <cmath>
#include <sstream>

namespace dualpix {

ThinLensParams::ThinLensParams(double aperture_m, double focal_length_m, double focus_distance_m,
                               double gain_px_per_m)
    : aperture(aperture_m), focal_length(focal_length_m), focus_distance(focus_distance_m),
      disparity_gain(gain_px_per_m) {
    if (!(aperture_m > 0.0)) {
        throw DomainError("aperture must be positive");
    }
    if (!(focal_length_m > 0.0 && focal_length_m < focus_distance_m)) {
        throw DomainError("thin lens needs 0 < f < g");
    }
    if (!(gain_px_per_m > 0.0)) {
        throw DomainError("disparity gain must be positive");
    }
}

double signed_blur_size(double z, const ThinLensParams &lens) {
    const double f = lens.focal_length;
    const double g = lens.focus_distance;
    if (!(z > f)) {
        throw DomainError("scene point at or inside the focal length");
    }
    if (!(g > f)) {
        throw DomainError("focus distance at or inside the focal length");
    }
    return lens.aperture * f * (z - g) / (z * (g - f));
}

DisparityCoeffs affine_coeffs(const ThinLensParams &lens) {
    const double f = lens.focal_length;
    const double g = lens.focus_distance;
    const double k = lens.disparity_gain * lens.aperture * f / (1.0 - f / g);
    return {k / g, -k};
}

double equivalent_scene_depth(double z1, const ThinLensParams &lens1,
                              const ThinLensParams &lens2) {
    const auto c1 = affine_coeffs(lens1);
    const auto c2 = affine_coeffs(lens2);
    const double denom = c1.A + c1.B / z1 - c2.A;
    const double z2 = c2.B / denom;
    if (!(z2 > 0.0) || !std::isfinite(z2)) {
        throw DomainError("no positive depth reproduces this disparity under the second lens");
    }
    return z2;
}

Grid equivalent_scene_depth(const Grid &z1, const ThinLensParams &lens1,
                            const ThinLensParams &lens2) {
    Grid out(z1.height(), z1.width());
    for (std::size_t y = 0; y < z1.height(); ++y) {
        for (std::size_t x = 0; x < z1.width(); ++x) {
            try {
                out(y, x) = equivalent_scene_depth(z1(y, x), lens1, lens2);
            } catch (const DomainError &) {
                std::ostringstream msg;
                msg << "ambiguity infeasible at pixel (x=" << x << ", y=" << y
                    << "): disparity and B2 have opposite signs";
                throw DomainError(msg.str());
            }
        }
    }
    return out;
}

} // namespace dualpix
