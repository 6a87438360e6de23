// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/micronet.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dualpix {

namespace {

// Output rows/cols [lo, hi) whose input tap (o * stride + k - pad) is in range.
std::pair<long, long> valid_outputs(long n_in, long n_out, long k, long stride, long pad) {
    long lo = 0;
    while (lo < n_out && lo * stride + k - pad < 0) {
        ++lo;
    }
    long hi = n_out;
    while (hi > lo && (hi - 1) * stride + k - pad >= n_in) {
        --hi;
    }
    return {lo, hi};
}

std::vector<std::pair<long, long>> tap_ranges(long n_in, long n_out, long k, long stride, long pad) {
    std::vector<std::pair<long, long>> r;
    for (long t = 0; t < k; ++t) {
        r.push_back(valid_outputs(n_in, n_out, t, stride, pad));
    }
    return r;
}

FeatureMap leaky(const FeatureMap &a) {
    FeatureMap h = a;
    for (double &v : h.data) {
        v = v > 0.0 ? v : kLeakySlope * v;
    }
    return h;
}

void leaky_backward(const FeatureMap &a, FeatureMap &grad) {
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
        if (!(a.data[i] > 0.0)) {
            grad.data[i] *= kLeakySlope;
        }
    }
}

Grid smooth_clamp(const FeatureMap &z) {
    Grid out(z.height, z.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 0.5 * (1.0 + std::tanh(z.data[i]));
    }
    return out;
}

FeatureMap smooth_clamp_backward(const FeatureMap &z, const Grid &upstream) {
    if (upstream.height() != z.height || upstream.width() != z.width) {
        throw DimensionError("upstream gradient does not match the network output");
    }
    FeatureMap g(1, z.height, z.width);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        const double t = std::tanh(z.data[i]);
        g.data[i] = upstream[i] * 0.5 * (1.0 - t * t);
    }
    return g;
}

FeatureMap upsample_concat(const FeatureMap &skip, const FeatureMap &coarse) {
    FeatureMap out(skip.channels + coarse.channels, skip.height, skip.width);
    std::copy(skip.data.begin(), skip.data.end(), out.data.begin());
    for (std::size_t c = 0; c < coarse.channels; ++c) {
        for (std::size_t y = 0; y < skip.height; ++y) {
            for (std::size_t x = 0; x < skip.width; ++x) {
                out.at(skip.channels + c, y, x) = coarse.at(c, y / 2, x / 2);
            }
        }
    }
    return out;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : shape(std::move(dims)) {
    const std::size_t n =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    data.assign(n, fill);
}

FeatureMap to_feature_map(const Image &image) {
    FeatureMap f(image.channels(), image.height(), image.width());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const auto v = image.channel(c).values();
        std::copy(v.begin(), v.end(), f.data.begin() + static_cast<long>(c * v.size()));
    }
    return f;
}

Grid to_grid(const FeatureMap &map) {
    return Grid(map.height, map.width,
                std::vector<double>(map.data.begin(),
                                    map.data.begin() + static_cast<long>(map.height * map.width)));
}

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t s)
    : in(in_ch), out(out_ch), kernel(k), stride(s), weight({out_ch, in_ch, k, k}), bias({out_ch}) {}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
    long hin, win, hout, wout, k, s, pad;
};

// Column matrix: row (ic, ky, kx), column output pixel; zero where padded.
RowMatrix im2col(const FeatureMap &x, const ConvGeometry &g) {
    RowMatrix col = RowMatrix::Zero(static_cast<long>(x.channels) * g.k * g.k, g.hout * g.wout);
    const auto rows = tap_ranges(g.hin, g.hout, g.k, g.s, g.pad);
    const auto cols = tap_ranges(g.win, g.wout, g.k, g.s, g.pad);
    for (long ic = 0; ic < static_cast<long>(x.channels); ++ic) {
        const double *src = &x.data[static_cast<std::size_t>(ic * g.hin * g.win)];
        for (long ky = 0; ky < g.k; ++ky) {
            const auto [y0, y1] = rows[static_cast<std::size_t>(ky)];
            for (long kx = 0; kx < g.k; ++kx) {
                const auto [x0, x1] = cols[static_cast<std::size_t>(kx)];
                double *dst = col.row((ic * g.k + ky) * g.k + kx).data();
                for (long oy = y0; oy < y1; ++oy) {
                    const double *row = src + (oy * g.s + ky - g.pad) * g.win + kx - g.pad;
                    for (long ox = x0; ox < x1; ++ox) {
                        dst[oy * g.wout + ox] = row[ox * g.s];
                    }
                }
            }
        }
    }
    return col;
}

void col2im(const RowMatrix &col, const ConvGeometry &g, FeatureMap &gx) {
    const auto rows = tap_ranges(g.hin, g.hout, g.k, g.s, g.pad);
    const auto cols = tap_ranges(g.win, g.wout, g.k, g.s, g.pad);
    for (long ic = 0; ic < static_cast<long>(gx.channels); ++ic) {
        double *dst = &gx.data[static_cast<std::size_t>(ic * g.hin * g.win)];
        for (long ky = 0; ky < g.k; ++ky) {
            const auto [y0, y1] = rows[static_cast<std::size_t>(ky)];
            for (long kx = 0; kx < g.k; ++kx) {
                const auto [x0, x1] = cols[static_cast<std::size_t>(kx)];
                const double *src = col.row((ic * g.k + ky) * g.k + kx).data();
                for (long oy = y0; oy < y1; ++oy) {
                    double *row = dst + (oy * g.s + ky - g.pad) * g.win + kx - g.pad;
                    for (long ox = x0; ox < x1; ++ox) {
                        row[ox * g.s] += src[oy * g.wout + ox];
                    }
                }
            }
        }
    }
}

} // namespace

FeatureMap Conv2d::forward(const FeatureMap &x) const {
    if (x.channels != in) {
        throw DimensionError("convolution input has the wrong channel count");
    }
    ConvGeometry g{static_cast<long>(x.height), static_cast<long>(x.width), 0, 0,
                   static_cast<long>(kernel), static_cast<long>(stride),
                   static_cast<long>(padding())};
    g.hout = (g.hin + 2 * g.pad - g.k) / g.s + 1;
    g.wout = (g.win + 2 * g.pad - g.k) / g.s + 1;
    const RowMatrix col = im2col(x, g);
    const Eigen::Map<const RowMatrix> w(weight.data.data(), static_cast<long>(out),
                                        static_cast<long>(in) * g.k * g.k);
    FeatureMap y(out, static_cast<std::size_t>(g.hout), static_cast<std::size_t>(g.wout));
    Eigen::Map<RowMatrix> ym(y.data.data(), static_cast<long>(out), g.hout * g.wout);
    ym.noalias() = w * col;
    for (std::size_t oc = 0; oc < out; ++oc) {
        ym.row(static_cast<long>(oc)).array() += bias.data[oc];
    }
    return y;
}

FeatureMap Conv2d::backward(const FeatureMap &x, const FeatureMap &grad_out, Tensor &grad_weight,
                            Tensor &grad_bias) const {
    const ConvGeometry g{static_cast<long>(x.height),        static_cast<long>(x.width),
                         static_cast<long>(grad_out.height), static_cast<long>(grad_out.width),
                         static_cast<long>(kernel),          static_cast<long>(stride),
                         static_cast<long>(padding())};
    const long taps = static_cast<long>(in) * g.k * g.k;
    const RowMatrix col = im2col(x, g);
    const Eigen::Map<const RowMatrix> go(grad_out.data.data(), static_cast<long>(out),
                                         g.hout * g.wout);
    const Eigen::Map<const RowMatrix> w(weight.data.data(), static_cast<long>(out), taps);
    Eigen::Map<RowMatrix> gw(grad_weight.data.data(), static_cast<long>(out), taps);
    gw.noalias() += go * col.transpose();
    for (std::size_t oc = 0; oc < out; ++oc) {
        grad_bias.data[oc] += go.row(static_cast<long>(oc)).sum();
    }
    const RowMatrix gcol = w.transpose() * go;
    FeatureMap gx(in, x.height, x.width);
    col2im(gcol, g, gx);
    return gx;
}

MicroNet::MicroNet()
    : conv1_(kInputChannels, 16, 7, 2), conv2_(16, 32, 3, 2), conv3_(32, 32, 3, 1),
      conv4_(48, 16, 3, 1), head_half_(16, 1, 3, 1), head_quarter_(32, 1, 3, 1) {}

void MicroNet::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (Conv2d *c : {&conv1_, &conv2_, &conv3_, &conv4_, &head_half_, &head_quarter_}) {
        const double fan_in = static_cast<double>(c->in * c->kernel * c->kernel);
        // He-uniform for leaky layers, small heads so training starts near 0.5.
        const bool head = c == &head_half_ || c == &head_quarter_;
        const double bound = head ? 0.1 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double &w : c->weight.data) {
            w = dist(rng);
        }
        std::fill(c->bias.data.begin(), c->bias.data.end(), 0.0);
    }
    mark_updated();
}

void MicroNet::zero() {
    for (Tensor *t : parameters()) {
        std::fill(t->data.begin(), t->data.end(), 0.0);
    }
    mark_updated();
}

MicroNet::Cache MicroNet::forward(const FeatureMap &input) const {
    if (input.channels != kInputChannels) {
        throw DimensionError("network input must have 5 channels");
    }
    if (input.height % 4 != 0 || input.width % 4 != 0 || input.height == 0 || input.width == 0) {
        throw DimensionError("network input dimensions must be divisible by 4");
    }
    Cache c;
    c.version = version_;
    c.input = input;
    c.a1 = conv1_.forward(input);
    c.h1 = leaky(c.a1);
    c.a2 = conv2_.forward(c.h1);
    c.h2 = leaky(c.a2);
    c.a3 = conv3_.forward(c.h2);
    c.h3 = leaky(c.a3);
    c.cat = upsample_concat(c.h1, c.h3);
    c.a4 = conv4_.forward(c.cat);
    c.h4 = leaky(c.a4);
    c.z_half = head_half_.forward(c.h4);
    c.z_quarter = head_quarter_.forward(c.h3);
    c.outputs = {smooth_clamp(c.z_half), smooth_clamp(c.z_quarter)};
    return c;
}

MicroNet::Gradients MicroNet::backward(const Cache &cache,
                                       const std::array<Grid, kScales> &upstream) const {
    if (cache.version != version_) {
        throw Error("stale forward cache: parameters changed since the forward pass");
    }
    Gradients g;
    for (const Tensor *t : parameters()) {
        g.params.emplace_back(t->shape);
    }
    // parameters() order: conv1 w,b; conv2; conv3; conv4; head_half; head_quarter.
    auto &p = g.params;
    const FeatureMap gz_half = smooth_clamp_backward(cache.z_half, upstream[0]);
    const FeatureMap gz_quarter = smooth_clamp_backward(cache.z_quarter, upstream[1]);

    FeatureMap gh4 = head_half_.backward(cache.h4, gz_half, p[8], p[9]);
    FeatureMap gh3 = head_quarter_.backward(cache.h3, gz_quarter, p[10], p[11]);
    leaky_backward(cache.a4, gh4);
    const FeatureMap gcat = conv4_.backward(cache.cat, gh4, p[6], p[7]);

    // Split the concat: first channels go to h1, the rest sum over 2x2 blocks into h3.
    FeatureMap gh1(cache.h1.channels, cache.h1.height, cache.h1.width);
    std::copy(gcat.data.begin(), gcat.data.begin() + static_cast<long>(gh1.data.size()),
              gh1.data.begin());
    for (std::size_t c = 0; c < cache.h3.channels; ++c) {
        for (std::size_t y = 0; y < cache.cat.height; ++y) {
            for (std::size_t x = 0; x < cache.cat.width; ++x) {
                gh3.at(c, y / 2, x / 2) += gcat.at(cache.h1.channels + c, y, x);
            }
        }
    }
    leaky_backward(cache.a3, gh3);
    FeatureMap gh2 = conv3_.backward(cache.h2, gh3, p[4], p[5]);
    leaky_backward(cache.a2, gh2);
    FeatureMap gh1_from2 = conv2_.backward(cache.h1, gh2, p[2], p[3]);
    for (std::size_t i = 0; i < gh1.data.size(); ++i) {
        gh1.data[i] += gh1_from2.data[i];
    }
    leaky_backward(cache.a1, gh1);
    g.input = conv1_.backward(cache.input, gh1, p[0], p[1]);
    return g;
}

std::vector<Tensor *> MicroNet::parameters() {
    return {&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias,
            &conv3_.weight, &conv3_.bias, &conv4_.weight, &conv4_.bias,
            &head_half_.weight, &head_half_.bias, &head_quarter_.weight, &head_quarter_.bias};
}

std::vector<const Tensor *> MicroNet::parameters() const {
    return {&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias,
            &conv3_.weight, &conv3_.bias, &conv4_.weight, &conv4_.bias,
            &head_half_.weight, &head_half_.bias, &head_quarter_.weight, &head_quarter_.bias};
}

std::vector<std::string> MicroNet::parameter_names() const {
    return {"conv1.weight", "conv1.bias", "conv2.weight",     "conv2.bias",
            "conv3.weight", "conv3.bias", "conv4.weight",     "conv4.bias",
            "head_half.weight", "head_half.bias", "head_quarter.weight", "head_quarter.bias"};
}

std::size_t MicroNet::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor *t : parameters()) {
        n += t->size();
    }
    return n;
}

} // namespace dualpix
