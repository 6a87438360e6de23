// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/losses.hpp"

#include "dualpix/warp.hpp"

#include <cmath>
#include <limits>

namespace dualpix {

namespace {

constexpr std::size_t kMaxPyramid = 8;

std::vector<std::uint8_t> downsample_mask(const std::vector<std::uint8_t> &mask, std::size_t h,
                                          std::size_t w) {
    std::vector<std::uint8_t> out((h / 2) * (w / 2));
    for (std::size_t y = 0; y < h / 2; ++y) {
        for (std::size_t x = 0; x < w / 2; ++x) {
            out[y * (w / 2) + x] = mask[2 * y * w + 2 * x] && mask[2 * y * w + 2 * x + 1] &&
                                   mask[(2 * y + 1) * w + 2 * x] &&
                                   mask[(2 * y + 1) * w + 2 * x + 1];
        }
    }
    return out;
}

// Adjoint of downsample2: each coarse gradient spreads a quarter to its children.
void accumulate_upsampled(Grid &fine, const Grid &coarse) {
    for (std::size_t y = 0; y < coarse.height(); ++y) {
        for (std::size_t x = 0; x < coarse.width(); ++x) {
            const double g = 0.25 * coarse(y, x);
            fine(2 * y, 2 * x) += g;
            fine(2 * y, 2 * x + 1) += g;
            fine(2 * y + 1, 2 * x) += g;
            fine(2 * y + 1, 2 * x + 1) += g;
        }
    }
}

double dot(const Grid &a, const Grid &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double sum(const Grid &a) {
    double s = 0.0;
    for (double v : a.values()) {
        s += v;
    }
    return s;
}

} // namespace

ViewSupervision::ViewSupervision(Image reference, std::array<Image, 4> neighbors, const Rig &rig,
                                 DepthRange range, std::size_t levels, PhotometricConfig cfg)
    : range_(range), levels_(levels), cfg_(cfg) {
    cfg_.validate();
    if (levels_ == 0) {
        throw ConfigError("view supervision needs at least one level");
    }
    for (const auto &n : neighbors) {
        if (!n.same_shape(reference)) {
            throw DimensionError("neighbour image shape differs from the reference");
        }
    }
    Level base{std::move(reference), std::move(neighbors), rig, {}};
    pyramid_.push_back(std::move(base));
    while (pyramid_.size() < kMaxPyramid) {
        const Level &prev = pyramid_.back();
        const std::size_t h = prev.reference.height();
        const std::size_t w = prev.reference.width();
        if (h % 2 != 0 || w % 2 != 0 || h < 8 || w < 8) { // keep levels at least 4x4
            break;
        }
        Level next;
        next.reference = downsample2(prev.reference);
        for (std::size_t j = 0; j < 4; ++j) {
            next.neighbors[j] = downsample2(prev.neighbors[j]);
        }
        next.rig = prev.rig.scaled(0.5);
        pyramid_.push_back(std::move(next));
    }
}

void ViewSupervision::set_neighbor_mask(std::size_t j, const std::vector<std::uint8_t> &mask) {
    if (j >= 4) {
        throw ConfigError("neighbour index out of range");
    }
    const std::size_t h0 = pyramid_[0].reference.height();
    const std::size_t w0 = pyramid_[0].reference.width();
    if (mask.size() != h0 * w0) {
        throw DimensionError("neighbour mask does not match base resolution");
    }
    pyramid_[0].masks[j] = mask;
    for (std::size_t l = 1; l < pyramid_.size(); ++l) {
        const std::size_t h = pyramid_[l - 1].reference.height();
        const std::size_t w = pyramid_[l - 1].reference.width();
        pyramid_[l].masks[j] = downsample_mask(pyramid_[l - 1].masks[j], h, w);
    }
}

LossResult ViewSupervision::evaluate(const Grid &prediction, bool with_gradient) const {
    return evaluate(prediction, levels_, with_gradient);
}

LossResult ViewSupervision::evaluate(const Grid &prediction, std::size_t levels,
                                     bool with_gradient) const {
    std::size_t first = pyramid_.size();
    for (std::size_t l = 0; l < pyramid_.size(); ++l) {
        if (pyramid_[l].reference.height() == prediction.height() &&
            pyramid_[l].reference.width() == prediction.width()) {
            first = l;
            break;
        }
    }
    if (first == pyramid_.size()) {
        throw DimensionError("prediction resolution matches no pyramid level");
    }
    const std::size_t last = std::min(pyramid_.size(), first + std::max<std::size_t>(levels, 1));

    std::vector<Grid> depths{prediction};
    for (std::size_t l = first + 1; l < last; ++l) {
        depths.push_back(downsample2(depths.back()));
    }
    LossResult total;
    std::vector<Grid> grads;
    for (std::size_t l = first; l < last; ++l) {
        LossResult r = evaluate_level(pyramid_[l], depths[l - first], with_gradient);
        total.value += r.value;
        if (with_gradient) {
            grads.push_back(std::move(r.gradient));
        }
    }
    if (with_gradient) {
        for (std::size_t k = grads.size(); k-- > 1;) {
            accumulate_upsampled(grads[k - 1], grads[k]);
        }
        total.gradient = std::move(grads.front());
    }
    return total;
}

LossResult ViewSupervision::evaluate_level(const Level &level, const Grid &depth,
                                           bool with_gradient) const {
    const std::size_t n = depth.size();
    std::array<WarpField, 4> warps;
    std::array<WarpJacobian, 4> jacobians;
    std::array<Image, 4> warped;
    std::array<std::vector<std::uint8_t>, 4> valid;
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<int> argmin(n, -1);

    for (std::size_t j = 0; j < 4; ++j) {
        warps[j] = induced_warp(depth, range_, level.rig[0], level.rig[j + 1],
                                with_gradient ? &jacobians[j] : nullptr);
        valid[j] = warps[j].valid;
        if (!level.masks[j].empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                valid[j][i] = valid[j][i] && level.masks[j][i];
            }
        }
        warped[j] = bilinear_sample(level.neighbors[j], warps[j]).image;
        const PhotometricDelta delta = photometric_delta(level.reference, warped[j], valid[j], cfg_);
        for (std::size_t i = 0; i < n; ++i) {
            if (delta.delta[i] < best[i]) {
                best[i] = delta.delta[i];
                argmin[i] = static_cast<int>(j);
            }
        }
    }
    std::size_t covered = 0;
    double sum_best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (argmin[i] >= 0) {
            ++covered;
            sum_best += best[i];
        }
    }
    if (covered == 0) {
        throw ZeroCoverageError("view supervision: no pixel is visible in any neighbour");
    }
    LossResult out;
    out.value = sum_best / static_cast<double>(covered);
    if (!with_gradient) {
        return out;
    }
    out.gradient = Grid(depth.height(), depth.width());
    const double inv = 1.0 / static_cast<double>(covered);
    Grid upstream(depth.height(), depth.width());
    Grid gx;
    Grid gy;
    for (std::size_t j = 0; j < 4; ++j) {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            upstream[i] = argmin[i] == static_cast<int>(j) ? inv : 0.0;
            any = any || upstream[i] != 0.0;
        }
        if (!any) {
            continue;
        }
        const auto g_img = photometric_delta_backward(level.reference, warped[j], upstream, cfg_);
        for (std::size_t c = 0; c < g_img.size(); ++c) {
            bilinear_gradient(level.neighbors[j].channel(c), warps[j], gx, gy);
            for (std::size_t i = 0; i < n; ++i) {
                if (valid[j][i]) {
                    out.gradient[i] += g_img[c][i] *
                                       (gx[i] * jacobians[j].dx[i] + gy[i] * jacobians[j].dy[i]);
                }
            }
        }
    }
    return out;
}

Grid apply_affine(const Grid &prediction, const AffineMap &map) {
    Grid out(prediction.height(), prediction.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = map(prediction[i]);
    }
    return out;
}

AssistedLoss assisted_loss(const Grid &prediction, const Grid &target, const Grid &confidence,
                           const ViewSupervision &supervision, Invariance mode,
                           bool with_gradient) {
    AssistedLoss out;
    if (mode == Invariance::none) {
        out.loss = supervision.evaluate(prediction, with_gradient);
        return out;
    }
    const DifferentiableFit fit = mode == Invariance::affine
                                      ? fit_affine_differentiable(prediction, target, confidence)
                                      : fit_scale_differentiable(prediction, target, confidence);
    out.map = fit.map;
    const LossResult inner = supervision.evaluate(apply_affine(prediction, fit.map), with_gradient);
    out.loss.value = inner.value;
    if (with_gradient) {
        // L(a(p) p + b(p)): direct term plus the paths through the solve.
        const double g_a = dot(inner.gradient, prediction);
        const double g_b = sum(inner.gradient);
        out.loss.gradient = Grid(prediction.height(), prediction.width());
        for (std::size_t i = 0; i < prediction.size(); ++i) {
            out.loss.gradient[i] = fit.map.a * inner.gradient[i] + g_a * fit.da[i] + g_b * fit.db[i];
        }
    }
    return out;
}

FoldedLoss folded_loss(const Grid &prediction, const FoldedLatents &latents,
                       const ViewSupervision &supervision, bool with_gradient) {
    const AffineMap map{latents.scale(), latents.b};
    const LossResult inner = supervision.evaluate(apply_affine(prediction, map), with_gradient);
    FoldedLoss out;
    out.loss.value = inner.value;
    if (with_gradient) {
        out.loss.gradient = Grid(prediction.height(), prediction.width());
        for (std::size_t i = 0; i < prediction.size(); ++i) {
            out.loss.gradient[i] = map.a * inner.gradient[i];
        }
        out.grad_a_hat = dot(inner.gradient, prediction) * sigmoid(latents.a_hat);
        out.grad_b = sum(inner.gradient);
    }
    return out;
}

} // namespace dualpix
