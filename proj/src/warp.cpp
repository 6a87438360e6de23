// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/warp.hpp"

#include <algorithm>
#include <cmath>

namespace dualpix {

namespace {

bool same_camera(const CameraModel &a, const CameraModel &b) {
    return a.fx() == b.fx() && a.fy() == b.fy() && a.cx() == b.cx() && a.cy() == b.cy() &&
           a.rotation() == b.rotation() && a.translation() == b.translation();
}

struct Cell {
    std::size_t x0, x1, y0, y1;
    double fx, fy;
};

Cell locate(double x, double y, std::size_t w, std::size_t h) {
    const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
    Cell c{};
    c.x0 = std::min(static_cast<std::size_t>(std::floor(xc)), w >= 2 ? w - 2 : 0);
    c.y0 = std::min(static_cast<std::size_t>(std::floor(yc)), h >= 2 ? h - 2 : 0);
    c.x1 = std::min(c.x0 + 1, w - 1);
    c.y1 = std::min(c.y0 + 1, h - 1);
    c.fx = xc - static_cast<double>(c.x0);
    c.fy = yc - static_cast<double>(c.y0);
    return c;
}

double interpolate(const Grid &g, const Cell &c) {
    return (1 - c.fy) * ((1 - c.fx) * g(c.y0, c.x0) + c.fx * g(c.y0, c.x1)) +
           c.fy * ((1 - c.fx) * g(c.y1, c.x0) + c.fx * g(c.y1, c.x1));
}

} // namespace

WarpField induced_warp(const Grid &depth, const DepthRange &range, const CameraModel &reference,
                       const CameraModel &target, WarpJacobian *jacobian) {
    const std::size_t h = depth.height();
    const std::size_t w = depth.width();
    WarpField field{Grid(h, w), Grid(h, w), std::vector<std::uint8_t>(h * w, 0)};
    if (jacobian != nullptr) {
        *jacobian = WarpJacobian{Grid(h, w), Grid(h, w)};
    }
    const bool identity = same_camera(reference, target);
    // Homogeneous target point for inverse depth rho: q = M r + c rho.
    const Eigen::Matrix3d m = target.rotation() * reference.rotation().transpose();
    const Eigen::Vector3d c = target.translation() - m * reference.translation();
    const double max_x = static_cast<double>(w - 1);
    const double max_y = static_cast<double>(h - 1);

    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            const double rho = range.inv_far() + depth[i] * range.inv_span();
            if (identity) {
                field.x[i] = static_cast<double>(x);
                field.y[i] = static_cast<double>(y);
                field.valid[i] = rho > 0.0 ? 1 : 0;
                continue;
            }
            const Eigen::Vector3d r((static_cast<double>(x) - reference.cx()) / reference.fx(),
                                    (static_cast<double>(y) - reference.cy()) / reference.fy(), 1.0);
            const Eigen::Vector3d q = m * r + c * rho;
            if (!(rho > 0.0) || !(q.z() > 0.0)) {
                field.x[i] = static_cast<double>(x);
                field.y[i] = static_cast<double>(y);
                continue;
            }
            const double inv_z = 1.0 / q.z();
            const double xt = target.fx() * q.x() * inv_z + target.cx();
            const double yt = target.fy() * q.y() * inv_z + target.cy();
            field.x[i] = xt;
            field.y[i] = yt;
            field.valid[i] = (xt >= 0.0 && xt <= max_x && yt >= 0.0 && yt <= max_y) ? 1 : 0;
            if (jacobian != nullptr) {
                const double s = range.inv_span() * inv_z * inv_z;
                jacobian->dx[i] = target.fx() * (c.x() * q.z() - q.x() * c.z()) * s;
                jacobian->dy[i] = target.fy() * (c.y() * q.z() - q.y() * c.z()) * s;
            }
        }
    }
    return field;
}

Grid bilinear_sample(const Grid &src, const WarpField &warp) {
    Grid out(warp.height(), warp.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = interpolate(src, locate(warp.x[i], warp.y[i], src.width(), src.height()));
    }
    return out;
}

SampledImage bilinear_sample(const Image &src, const WarpField &warp) {
    std::vector<Grid> planes;
    planes.reserve(src.channels());
    for (std::size_t c = 0; c < src.channels(); ++c) {
        planes.push_back(bilinear_sample(src.channel(c), warp));
    }
    return {Image(std::move(planes)), warp.valid};
}

void bilinear_gradient(const Grid &src, const WarpField &warp, Grid &d_dx, Grid &d_dy) {
    d_dx = Grid(warp.height(), warp.width());
    d_dy = Grid(warp.height(), warp.width());
    for (std::size_t i = 0; i < d_dx.size(); ++i) {
        const Cell c = locate(warp.x[i], warp.y[i], src.width(), src.height());
        d_dx[i] = (1 - c.fy) * (src(c.y0, c.x1) - src(c.y0, c.x0)) +
                  c.fy * (src(c.y1, c.x1) - src(c.y1, c.x0));
        d_dy[i] = (1 - c.fx) * (src(c.y1, c.x0) - src(c.y0, c.x0)) +
                  c.fx * (src(c.y1, c.x1) - src(c.y0, c.x1));
    }
}

Grid warp_depth_gradient(const Image &src, const Grid &depth, const DepthRange &range,
                         const CameraModel &reference, const CameraModel &target,
                         const std::vector<Grid> &upstream) {
    if (upstream.size() != src.channels()) {
        throw DimensionError("upstream gradient needs one plane per source channel");
    }
    WarpJacobian jac;
    const WarpField warp = induced_warp(depth, range, reference, target, &jac);
    Grid grad(depth.height(), depth.width());
    Grid gx;
    Grid gy;
    for (std::size_t ch = 0; ch < src.channels(); ++ch) {
        if (!upstream[ch].same_shape(depth)) {
            throw DimensionError("upstream gradient shape mismatch");
        }
        bilinear_gradient(src.channel(ch), warp, gx, gy);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            if (warp.valid[i]) {
                grad[i] += upstream[ch][i] * (gx[i] * jac.dx[i] + gy[i] * jac.dy[i]);
            }
        }
    }
    return grad;
}

} // namespace dualpix
