// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/affine_fit.hpp"

#include <algorithm>
#include <cmath>

namespace dualpix {

namespace {

void check_shapes(const Grid &pred, const Grid &target, const Grid &weight) {
    if (!pred.same_shape(target) || !pred.same_shape(weight)) {
        throw DimensionError("fit inputs differ in shape");
    }
}

struct Moments {
    double w = 0;   // sum C
    double mp = 0;  // weighted mean of pred
    double md = 0;  // weighted mean of target
    double spp = 0; // sum C (p - mp)^2
    double spd = 0; // sum C (p - mp)(d - md)
};

Moments moments(const Grid &pred, const Grid &target, const Grid &weight) {
    Moments m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (weight[i] > 0.0) {
            m.w += weight[i];
            m.mp += weight[i] * pred[i];
            m.md += weight[i] * target[i];
        }
    }
    if (!(m.w > 0.0)) {
        throw SingularFitError("affine fit has zero total confidence");
    }
    m.mp /= m.w;
    m.md /= m.w;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (weight[i] > 0.0) {
            const double dp = pred[i] - m.mp;
            m.spp += weight[i] * dp * dp;
            m.spd += weight[i] * dp * (target[i] - m.md);
        }
    }
    if (!(m.spp > kDegenerateVariance)) {
        throw SingularFitError("affine fit is degenerate: prediction is constant under the weights");
    }
    return m;
}

} // namespace

AffineMap fit_affine(const Grid &pred, const Grid &target, const Grid &weight) {
    check_shapes(pred, target, weight);
    const Moments m = moments(pred, target, weight);
    const double a = m.spd / m.spp;
    return {a, m.md - a * m.mp};
}

AffineMap fit_scale(const Grid &pred, const Grid &target, const Grid &weight) {
    return fit_scale_differentiable(pred, target, weight).map;
}

DifferentiableFit fit_affine_differentiable(const Grid &pred, const Grid &target,
                                            const Grid &weight) {
    check_shapes(pred, target, weight);
    const Moments m = moments(pred, target, weight);
    DifferentiableFit out;
    out.map.a = m.spd / m.spp;
    out.map.b = m.md - out.map.a * m.mp;
    out.da = Grid(pred.height(), pred.width());
    out.db = Grid(pred.height(), pred.width());

    // N = [[Spp', Sp], [Sp, W]] with raw moments; det N = W * Spp (centred).
    // d theta / d p_i = N^{-1} (dr/dp_i - dN/dp_i theta)
    //                 = N^{-1} C_i [d_i - 2 a p_i - b, -a].
    const double sp = m.w * m.mp;
    const double spp_raw = m.spp + m.w * m.mp * m.mp;
    const double det = m.w * m.spp;
    const double a = out.map.a;
    const double b = out.map.b;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double c = weight[i];
        if (!(c > 0.0)) {
            continue;
        }
        const double r0 = c * (target[i] - 2.0 * a * pred[i] - b);
        const double r1 = -c * a;
        out.da[i] = (m.w * r0 - sp * r1) / det;
        out.db[i] = (-sp * r0 + spp_raw * r1) / det;
    }
    return out;
}

DifferentiableFit fit_scale_differentiable(const Grid &pred, const Grid &target,
                                           const Grid &weight) {
    check_shapes(pred, target, weight);
    double spp = 0.0;
    double spd = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (weight[i] > 0.0) {
            spp += weight[i] * pred[i] * pred[i];
            spd += weight[i] * pred[i] * target[i];
        }
    }
    if (!(spp > kDegenerateVariance)) {
        throw SingularFitError("scale fit is degenerate: prediction vanishes under the weights");
    }
    DifferentiableFit out;
    out.map = {spd / spp, 0.0};
    out.da = Grid(pred.height(), pred.width());
    out.db = Grid(pred.height(), pred.width());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (weight[i] > 0.0) {
            out.da[i] = weight[i] * (target[i] - 2.0 * out.map.a * pred[i]) / spp;
        }
    }
    return out;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace dualpix
