// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualpix {

// Error hierarchy shared by every module. Callers that only care about
// failure catch dualpix::Error; tests match on the concrete type.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};
class DomainError : public Error {
  public:
    using Error::Error;
};
class FormatError : public Error {
  public:
    using Error::Error;
};
class DimensionError : public Error {
  public:
    using Error::Error;
};
class ConfigError : public Error {
  public:
    using Error::Error;
};
class SingularFitError : public Error {
  public:
    using Error::Error;
};
/// No reference pixel has a valid warp into any neighbour.
class ZeroCoverageError : public Error {
  public:
    using Error::Error;
};

/// Row-major H x W raster of doubles.
class Grid {
  public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, double fill = 0.0);
    Grid(std::size_t height, std::size_t width, std::vector<double> values);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double &operator()(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
    double operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
    double &operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const Grid &other) const {
        return height_ == other.height_ && width_ == other.width_;
    }
    bool all_finite() const;
    void fill(double v);

    friend bool operator==(const Grid &, const Grid &) = default;

  private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

/// Planar multi-channel raster. Channel counts 1, 3 (RGB) and 5
/// (RGB + left DP + right DP) are the supported layouts.
class Image {
  public:
    Image() = default;
    Image(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
    explicit Image(std::vector<Grid> planes);

    std::size_t height() const { return planes_.empty() ? 0 : planes_[0].height(); }
    std::size_t width() const { return planes_.empty() ? 0 : planes_[0].width(); }
    std::size_t channels() const { return planes_.size(); }

    Grid &channel(std::size_t c) { return planes_[c]; }
    const Grid &channel(std::size_t c) const { return planes_[c]; }
    double &operator()(std::size_t c, std::size_t y, std::size_t x) { return planes_[c](y, x); }
    double operator()(std::size_t c, std::size_t y, std::size_t x) const {
        return planes_[c](y, x);
    }

    bool same_shape(const Image &other) const;
    /// Throws DomainError unless every value lies in [0, 1].
    void check_unit_range() const;

    friend bool operator==(const Image &, const Image &) = default;

  private:
    std::vector<Grid> planes_;
};

/// Mean over channels; for RGB this is the grayscale guide used by stereo.
Grid to_gray(const Image &image);

struct DepthRange {
    double z_near = 0.2;
    double z_far = 100.0;

    DepthRange() = default;
    DepthRange(double near, double far);

    double inv_near() const { return 1.0 / z_near; }
    double inv_far() const { return 1.0 / z_far; }
    double inv_span() const { return 1.0 / z_near - 1.0 / z_far; }
};

/// Per-pixel normalized inverse depth: 1 at z_near, 0 at z_far.
struct InverseDepthMap {
    Grid grid;
    DepthRange range;
};

/// Affine remapping pred -> a * pred + b.
struct AffineMap {
    double a = 1.0;
    double b = 0.0;
    double operator()(double v) const { return a * v + b; }
};

double metric_to_normalized_inverse(double z, const DepthRange &range);
double normalized_inverse_to_metric(double d, const DepthRange &range);

InverseDepthMap metric_to_normalized_inverse(const Grid &depth_m, const DepthRange &range);
Grid normalized_inverse_to_metric(const InverseDepthMap &map);

/// 2x2 box average; odd trailing rows/columns are dropped.
Grid downsample2(const Grid &grid);
Image downsample2(const Image &image);

Grid crop(const Grid &grid, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

} // namespace dualpix
