// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/affine_fit.hpp"
#include "dualpix/camera.hpp"
#include "dualpix/core.hpp"
#include "dualpix/photometric.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace dualpix {

struct LossResult {
    double value = 0.0;
    Grid gradient; // d value / d prediction
};

/// Photometric view supervision of a reference image by its four rig
/// neighbours. Holds an image pyramid (2x2 box averages) so predictions at
/// any pyramid resolution can be scored; a prediction scored at level L is
/// also averaged down and scored at the next `levels - 1` levels, with equal
/// weights.
class ViewSupervision {
  public:
    ViewSupervision(Image reference, std::array<Image, 4> neighbors, const Rig &rig,
                    DepthRange range, std::size_t levels = 3, PhotometricConfig cfg = {});

    /// Marks pixels of neighbour `j` as unusable (mask value 0). The mask is at
    /// base resolution; a coarse pixel is usable only if all its children are.
    void set_neighbor_mask(std::size_t j, const std::vector<std::uint8_t> &mask);

    /// Scores a normalized inverse-depth prediction. Each pixel takes the
    /// minimum photometric delta over neighbours whose warp is valid (ties go to
    /// the lower index); the level loss is the mean over pixels with at least
    /// one valid neighbour. Throws Error when a level has no such pixel.
    LossResult evaluate(const Grid &prediction, bool with_gradient = true) const;
    LossResult evaluate(const Grid &prediction, std::size_t levels, bool with_gradient) const;

    std::size_t levels() const { return levels_; }
    std::size_t pyramid_size() const { return pyramid_.size(); }
    const Image &reference(std::size_t level = 0) const { return pyramid_[level].reference; }
    const Rig &rig(std::size_t level = 0) const { return pyramid_[level].rig; }
    const DepthRange &range() const { return range_; }

  private:
    struct Level {
        Image reference;
        std::array<Image, 4> neighbors;
        Rig rig;
        std::array<std::vector<std::uint8_t>, 4> masks; // empty = all usable
    };

    LossResult evaluate_level(const Level &level, const Grid &depth, bool with_gradient) const;

    std::vector<Level> pyramid_;
    DepthRange range_;
    std::size_t levels_;
    PhotometricConfig cfg_;
};

enum class Invariance { none, scale, affine };

/// View supervision after refitting the prediction to partial ground truth:
/// (a, b) solve the confidence-weighted least squares problem against
/// `target` and the loss is evaluated at a * pred + b. Gradients flow through
/// the warp and the solve. Scale mode fixes b = 0.
struct AssistedLoss {
    LossResult loss;
    AffineMap map;
};
AssistedLoss assisted_loss(const Grid &prediction, const Grid &target, const Grid &confidence,
                           const ViewSupervision &supervision,
                           Invariance mode = Invariance::affine, bool with_gradient = true);

/// Per-example latent affine parameters optimised jointly with the network.
/// The realised scale is epsilon + softplus(a_hat), always above epsilon.
struct FoldedLatents {
    static constexpr double kEpsilon = 1e-5;
    double a_hat = 0.0;
    double b = 0.0;

    double scale() const { return kEpsilon + softplus(a_hat); }
};

struct FoldedLoss {
    LossResult loss;
    double grad_a_hat = 0.0;
    double grad_b = 0.0;
};
FoldedLoss folded_loss(const Grid &prediction, const FoldedLatents &latents,
                       const ViewSupervision &supervision, bool with_gradient = true);

/// Prediction mapped through a * pred + b.
Grid apply_affine(const Grid &prediction, const AffineMap &map);

} // namespace dualpix
