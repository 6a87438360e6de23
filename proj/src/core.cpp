// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualpix {

Grid::Grid(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {}

Grid::Grid(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_) {
        throw DimensionError("grid value count does not match its dimensions");
    }
}

bool Grid::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Grid::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Image::Image(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : planes_(channels, Grid(height, width, fill)) {}

Image::Image(std::vector<Grid> planes) : planes_(std::move(planes)) {
    for (const auto &p : planes_) {
        if (!p.same_shape(planes_.front())) {
            throw DimensionError("image planes differ in shape");
        }
    }
}

bool Image::same_shape(const Image &other) const {
    return channels() == other.channels() && height() == other.height() &&
           width() == other.width();
}

void Image::check_unit_range() const {
    for (const auto &p : planes_) {
        for (double v : p.values()) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw DomainError("image value outside [0, 1]");
            }
        }
    }
}

Grid to_gray(const Image &image) {
    Grid gray(image.height(), image.width());
    const double inv = 1.0 / static_cast<double>(image.channels());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const auto src = image.channel(c).values();
        for (std::size_t i = 0; i < gray.size(); ++i) {
            gray[i] += src[i] * inv;
        }
    }
    return gray;
}

DepthRange::DepthRange(double near, double far) : z_near(near), z_far(far) {
    if (!(near > 0.0 && near < far && std::isfinite(far))) {
        std::ostringstream msg;
        msg << "invalid depth range (" << near << ", " << far << ")";
        throw DomainError(msg.str());
    }
}

double metric_to_normalized_inverse(double z, const DepthRange &range) {
    if (!(z > 0.0)) {
        throw DomainError("metric depth must be positive");
    }
    const double d = (1.0 / z - range.inv_far()) / range.inv_span();
    return std::clamp(d, 0.0, 1.0);
}

double normalized_inverse_to_metric(double d, const DepthRange &range) {
    if (!(d >= 0.0 && d <= 1.0)) {
        throw DomainError("normalized inverse depth outside [0, 1]");
    }
    return 1.0 / (range.inv_far() + d * range.inv_span());
}

InverseDepthMap metric_to_normalized_inverse(const Grid &depth_m, const DepthRange &range) {
    InverseDepthMap out{Grid(depth_m.height(), depth_m.width()), range};
    for (std::size_t i = 0; i < depth_m.size(); ++i) {
        out.grid[i] = metric_to_normalized_inverse(depth_m[i], range);
    }
    return out;
}

Grid normalized_inverse_to_metric(const InverseDepthMap &map) {
    Grid out(map.grid.height(), map.grid.width());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = normalized_inverse_to_metric(map.grid[i], map.range);
    }
    return out;
}

Grid downsample2(const Grid &grid) {
    const std::size_t h = grid.height() / 2;
    const std::size_t w = grid.width() / 2;
    if (h == 0 || w == 0) {
        throw DimensionError("grid too small to downsample");
    }
    Grid out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            out(y, x) = 0.25 * (grid(2 * y, 2 * x) + grid(2 * y, 2 * x + 1) +
                                grid(2 * y + 1, 2 * x) + grid(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

Image downsample2(const Image &image) {
    std::vector<Grid> planes;
    planes.reserve(image.channels());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        planes.push_back(downsample2(image.channel(c)));
    }
    return Image(std::move(planes));
}

Grid crop(const Grid &grid, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    if (y0 + h > grid.height() || x0 + w > grid.width()) {
        throw DimensionError("crop window exceeds grid");
    }
    Grid out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            out(y, x) = grid(y0 + y, x0 + x);
        }
    }
    return out;
}

} // namespace dualpix
