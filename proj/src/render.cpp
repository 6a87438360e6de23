// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/render.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualpix {

namespace {

double sample_clamped(const Grid &g, double x, double y) {
    const double xc = std::clamp(x, 0.0, static_cast<double>(g.width() - 1));
    const double yc = std::clamp(y, 0.0, static_cast<double>(g.height() - 1));
    const auto x0 = static_cast<std::size_t>(std::floor(xc));
    const auto y0 = static_cast<std::size_t>(std::floor(yc));
    const std::size_t x1 = std::min(x0 + 1, g.width() - 1);
    const std::size_t y1 = std::min(y0 + 1, g.height() - 1);
    const double fx = xc - static_cast<double>(x0);
    const double fy = yc - static_cast<double>(y0);
    return (1 - fy) * ((1 - fx) * g(y0, x0) + fx * g(y0, x1)) +
           fy * ((1 - fx) * g(y1, x0) + fx * g(y1, x1));
}

bool mask_covers(const SceneLayer &layer, double tx, double ty) {
    if (!layer.mask) {
        return true;
    }
    const double xr = std::round(tx);
    const double yr = std::round(ty);
    if (xr < 0 || yr < 0 || xr >= static_cast<double>(layer.mask->width()) ||
        yr >= static_cast<double>(layer.mask->height())) {
        return false;
    }
    return (*layer.mask)(static_cast<std::size_t>(yr), static_cast<std::size_t>(xr)) >= 0.5;
}

std::size_t dp_source_channel(const Image &texture) { return texture.channels() >= 3 ? 1 : 0; }

} // namespace

void LayeredScene::validate() const {
    if (height == 0 || width == 0) {
        throw ConfigError("scene needs a positive output size");
    }
    if (layers.empty()) {
        throw ConfigError("scene has no layers");
    }
    if (layers.front().mask) {
        throw ConfigError("background layer must be fully opaque");
    }
    const std::size_t channels = layers.front().texture.channels();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto &l = layers[i];
        if (l.texture.channels() != channels || (channels != 1 && channels != 3)) {
            throw ConfigError("layer textures must all be 1- or all 3-channel");
        }
        if (l.texture.height() < height || l.texture.width() < width) {
            throw ConfigError("layer texture smaller than the output image");
        }
        if (l.mask && (l.mask->height() != l.texture.height() ||
                       l.mask->width() != l.texture.width())) {
            throw DimensionError("layer mask does not match its texture");
        }
        if (!(l.depth_m >= range.z_near && l.depth_m <= range.z_far)) {
            throw DomainError("layer depth outside the scene depth range");
        }
        if (i > 0 && !(l.depth_m < layers[i - 1].depth_m)) {
            throw ConfigError("layers must be listed back to front with decreasing depth");
        }
        l.texture.check_unit_range();
    }
}

namespace {

// Integral of the unit tent max(0, 1 - |t|) from -inf to u.
double tent_cdf(double u) {
    if (u <= -1.0) {
        return 0.0;
    }
    if (u <= 0.0) {
        return 0.5 * (u + 1.0) * (u + 1.0);
    }
    if (u <= 1.0) {
        return 1.0 - 0.5 * (1.0 - u) * (1.0 - u);
    }
    return 1.0;
}

} // namespace

std::pair<int, std::vector<double>> box_kernel(double lo, double hi) {
    if (hi - lo <= 1e-6) {
        // Narrow box: linear interpolation at the centre (the cdf difference
        // would lose precision to cancellation).
        const double p = 0.5 * (lo + hi);
        const int first = static_cast<int>(std::floor(p));
        const double t = p - first;
        if (t == 0.0) {
            return {first, {1.0}};
        }
        return {first, {1.0 - t, t}};
    }
    const int first = static_cast<int>(std::floor(lo));
    const int last = static_cast<int>(std::ceil(hi));
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(last - first + 1));
    const double inv = 1.0 / (hi - lo);
    for (int k = first; k <= last; ++k) {
        w.push_back((tent_cdf(hi - k) - tent_cdf(lo - k)) * inv);
    }
    return {first, std::move(w)};
}

Grid convolve_rows(const Grid &src, int first_offset, const std::vector<double> &weights) {
    Grid out(src.height(), src.width());
    const auto w = static_cast<long>(src.width());
    for (std::size_t y = 0; y < src.height(); ++y) {
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::size_t j = 0; j < weights.size(); ++j) {
                const long xs = std::clamp(x - (first_offset + static_cast<long>(j)), 0L, w - 1);
                acc += weights[j] * src(y, static_cast<std::size_t>(xs));
            }
            out(y, static_cast<std::size_t>(x)) = acc;
        }
    }
    return out;
}

Image render_view(const LayeredScene &scene, const CameraModel &reference,
                  const CameraModel &view, Grid *layer_index) {
    const std::size_t channels = scene.layers.front().texture.channels();
    Image out(scene.height, scene.width, channels);
    if (layer_index != nullptr) {
        *layer_index = Grid(scene.height, scene.width);
    }
    // Ray from the view camera expressed in the reference frame.
    const Eigen::Matrix3d r_rel = reference.rotation() * view.rotation().transpose();
    const Eigen::Vector3d origin = reference.rotation() * view.center() + reference.translation();

    for (std::size_t y = 0; y < scene.height; ++y) {
        for (std::size_t x = 0; x < scene.width; ++x) {
            const Eigen::Vector3d ray_view((static_cast<double>(x) - view.cx()) / view.fx(),
                                           (static_cast<double>(y) - view.cy()) / view.fy(), 1.0);
            const Eigen::Vector3d dir = r_rel * ray_view;
            for (std::size_t li = scene.layers.size(); li-- > 0;) {
                const auto &layer = scene.layers[li];
                const double s = (layer.depth_m - origin.z()) / dir.z();
                if (!(s > 0.0)) {
                    continue;
                }
                const Eigen::Vector3d p = origin + s * dir;
                const double u = reference.fx() * p.x() / p.z() + reference.cx();
                const double v = reference.fy() * p.y() / p.z() + reference.cy();
                const double tx = u + 0.5 * static_cast<double>(layer.texture.width() - scene.width);
                const double ty =
                    v + 0.5 * static_cast<double>(layer.texture.height() - scene.height);
                if (li > 0 && !mask_covers(layer, tx, ty)) {
                    continue;
                }
                for (std::size_t c = 0; c < channels; ++c) {
                    out(c, y, x) = sample_clamped(layer.texture.channel(c), tx, ty);
                }
                if (layer_index != nullptr) {
                    (*layer_index)(y, x) = static_cast<double>(li);
                }
                break;
            }
        }
    }
    return out;
}

Capture render_capture(const LayeredScene &scene, const Rig &rig, const ThinLensParams &lens) {
    scene.validate();
    Capture cap;
    cap.center = render_view(scene, rig[0], rig[0], &cap.layer_index);
    for (std::size_t j = 0; j < 4; ++j) {
        cap.neighbors[j] = render_view(scene, rig[0], rig[j + 1]);
    }

    const std::size_t h = scene.height;
    const std::size_t w = scene.width;
    const std::size_t src_ch = dp_source_channel(scene.layers.front().texture);
    Grid left(h, w);
    Grid right(h, w);
    cap.full_aperture = Grid(h, w);
    for (std::size_t li = 0; li < scene.layers.size(); ++li) {
        // Visible part of this layer in the sharp reference view.
        Grid contrib(h, w);
        bool any = false;
        for (std::size_t i = 0; i < contrib.size(); ++i) {
            if (cap.layer_index[i] == static_cast<double>(li)) {
                contrib[i] = cap.center.channel(src_ch)[i];
                any = true;
            }
        }
        if (!any) {
            continue;
        }
        const double d = dp_disparity(scene.layers[li].depth_m, lens);
        const double half = std::abs(d);
        if (2.0 * half > static_cast<double>(w)) {
            std::ostringstream msg;
            msg << "defocus blur of " << 2.0 * half << " px exceeds image width " << w;
            throw ConfigError(msg.str());
        }
        // Behind the focal plane (d > 0) the left view receives light from the
        // right half of the aperture and is displaced towards +x.
        const auto [lo_l, w_l] = d >= 0 ? box_kernel(0.0, half) : box_kernel(-half, 0.0);
        const auto [lo_r, w_r] = d >= 0 ? box_kernel(-half, 0.0) : box_kernel(0.0, half);
        const auto [lo_f, w_f] = box_kernel(-half, half);
        const Grid bl = convolve_rows(contrib, lo_l, w_l);
        const Grid br = convolve_rows(contrib, lo_r, w_r);
        const Grid bf = convolve_rows(contrib, lo_f, w_f);
        for (std::size_t i = 0; i < contrib.size(); ++i) {
            left[i] += bl[i];
            right[i] += br[i];
            cap.full_aperture[i] += 2.0 * bf[i];
        }
    }
    cap.dp.left = Image({std::move(left)});
    cap.dp.right = Image({std::move(right)});

    cap.depth = InverseDepthMap{Grid(h, w), scene.range};
    cap.confidence = Grid(h, w, 1.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto li = static_cast<std::size_t>(cap.layer_index(y, x));
            cap.depth.grid(y, x) = metric_to_normalized_inverse(scene.layers[li].depth_m, scene.range);
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dx = -1; dx <= 1; ++dx) {
                    const long yy = static_cast<long>(y) + dy;
                    const long xx = static_cast<long>(x) + dx;
                    if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) {
                        continue;
                    }
                    if (cap.layer_index(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) !=
                        cap.layer_index(y, x)) {
                        cap.confidence(y, x) = 0.0;
                    }
                }
            }
        }
    }
    return cap;
}

} // namespace dualpix
