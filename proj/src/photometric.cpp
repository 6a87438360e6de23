// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/photometric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dualpix {

namespace {

long reflect(long i, long n) {
    if (n == 1) {
        return 0;
    }
    while (i < 0 || i >= n) {
        i = i < 0 ? -i : 2 * (n - 1) - i;
    }
    return i;
}

void check_pair(const Image &a, const Image &b) {
    if (!a.same_shape(b)) {
        throw DimensionError("photometric inputs differ in shape");
    }
}

// Window statistics of one channel at one pixel.
struct WindowStats {
    double mx, my, exx, eyy, exy;
};

struct SsimTerms {
    double a1, a2, b1, b2, ssim;
};

SsimTerms ssim_terms(const WindowStats &s, double c1, double c2) {
    SsimTerms t{};
    t.a1 = 2.0 * s.mx * s.my + c1;
    t.a2 = 2.0 * (s.exy - s.mx * s.my) + c2;
    t.b1 = s.mx * s.mx + s.my * s.my + c1;
    t.b2 = (s.exx - s.mx * s.mx) + (s.eyy - s.my * s.my) + c2;
    t.ssim = (t.a1 * t.a2) / (t.b1 * t.b2);
    return t;
}

template <typename Fn>
void for_window(long y, long x, long radius, long h, long w, Fn &&fn) {
    for (long dy = -radius; dy <= radius; ++dy) {
        const long yy = reflect(y + dy, h);
        for (long dx = -radius; dx <= radius; ++dx) {
            fn(static_cast<std::size_t>(yy), static_cast<std::size_t>(reflect(x + dx, w)));
        }
    }
}

WindowStats window_stats(const Grid &gx, const Grid &gy, long y, long x, long radius) {
    WindowStats s{};
    const long h = static_cast<long>(gx.height());
    const long w = static_cast<long>(gx.width());
    for_window(y, x, radius, h, w, [&](std::size_t yy, std::size_t xx) {
        const double a = gx(yy, xx);
        const double b = gy(yy, xx);
        s.mx += a;
        s.my += b;
        s.exx += a * a;
        s.eyy += b * b;
        s.exy += a * b;
    });
    const double n = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
    s.mx /= n;
    s.my /= n;
    s.exx /= n;
    s.eyy /= n;
    s.exy /= n;
    return s;
}

} // namespace

void PhotometricConfig::validate() const {
    if (std::abs(dssim_weight + charbonnier_weight - 1.0) > 1e-12) {
        throw ConfigError("photometric weights must sum to 1");
    }
    if (ssim_window < 1 || ssim_window % 2 == 0) {
        throw ConfigError("SSIM window must be odd");
    }
}

double charbonnier(double x, double c) {
    const double t = x / c;
    return std::sqrt(t * t + 1.0) - 1.0;
}

double charbonnier_derivative(double x, double c) {
    const double t = x / c;
    return (x / (c * c)) / std::sqrt(t * t + 1.0);
}

Grid dssim(const Image &p0, const Image &p1, const PhotometricConfig &cfg) {
    check_pair(p0, p1);
    const long h = static_cast<long>(p0.height());
    const long w = static_cast<long>(p0.width());
    const long radius = cfg.ssim_window / 2;
    const double inv_ch = 1.0 / static_cast<double>(p0.channels());
    Grid out(p0.height(), p0.width());
    for (std::size_t c = 0; c < p0.channels(); ++c) {
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                const auto s = window_stats(p0.channel(c), p1.channel(c), y, x, radius);
                const double d = std::clamp(0.5 * (1.0 - ssim_terms(s, cfg.ssim_c1, cfg.ssim_c2).ssim),
                                            0.0, 1.0);
                out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += d * inv_ch;
            }
        }
    }
    return out;
}

std::vector<Grid> dssim_backward(const Image &p0, const Image &p1, const Grid &upstream,
                                 const PhotometricConfig &cfg) {
    check_pair(p0, p1);
    const long h = static_cast<long>(p0.height());
    const long w = static_cast<long>(p0.width());
    const long radius = cfg.ssim_window / 2;
    const double n = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
    const double inv_ch = 1.0 / static_cast<double>(p0.channels());
    std::vector<Grid> grad(p0.channels(), Grid(p0.height(), p0.width()));
    for (std::size_t c = 0; c < p0.channels(); ++c) {
        const Grid &gx = p0.channel(c);
        const Grid &gy = p1.channel(c);
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                const double up = upstream(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                if (up == 0.0) {
                    continue;
                }
                const auto s = window_stats(gx, gy, y, x, radius);
                const auto t = ssim_terms(s, cfg.ssim_c1, cfg.ssim_c2);
                const double d = 0.5 * (1.0 - t.ssim);
                if (d < 0.0 || d > 1.0) {
                    continue; // clamped
                }
                const double den = t.b1 * t.b2;
                // dSSIM with respect to the window moments of p1.
                const double g_my = 2.0 * s.mx * (t.a2 - t.a1) / den -
                                    t.ssim * 2.0 * s.my * (t.b2 - t.b1) / den;
                const double g_eyy = -t.ssim / t.b2;
                const double g_exy = 2.0 * t.a1 / den;
                const double scale = -0.5 * up * inv_ch / n;
                for_window(y, x, radius, h, w, [&](std::size_t yy, std::size_t xx) {
                    grad[c](yy, xx) +=
                        scale * (g_my + 2.0 * gy(yy, xx) * g_eyy + gx(yy, xx) * g_exy);
                });
            }
        }
    }
    return grad;
}

double PhotometricDelta::mean() const {
    if (valid_count == 0) {
        return 0.0;
    }
    double sum = 0.0;
    for (double v : delta.values()) {
        if (std::isfinite(v)) {
            sum += v;
        }
    }
    return sum / static_cast<double>(valid_count);
}

PhotometricDelta photometric_delta(const Image &i0, const Image &i1,
                                   const std::vector<std::uint8_t> &valid,
                                   const PhotometricConfig &cfg) {
    check_pair(i0, i1);
    if (valid.size() != i0.height() * i0.width()) {
        throw DimensionError("validity mask does not match image");
    }
    PhotometricDelta out;
    out.delta = dssim(i0, i1, cfg);
    const double inv_ch = 1.0 / static_cast<double>(i0.channels());
    for (std::size_t i = 0; i < out.delta.size(); ++i) {
        if (!valid[i]) {
            out.delta[i] = std::numeric_limits<double>::infinity();
            continue;
        }
        double robust = 0.0;
        for (std::size_t c = 0; c < i0.channels(); ++c) {
            robust += charbonnier(i0.channel(c)[i] - i1.channel(c)[i], cfg.charbonnier_c);
        }
        out.delta[i] = cfg.dssim_weight * out.delta[i] + cfg.charbonnier_weight * robust * inv_ch;
        ++out.valid_count;
    }
    out.zero_coverage = out.valid_count == 0;
    return out;
}

std::vector<Grid> photometric_delta_backward(const Image &i0, const Image &i1,
                                             const Grid &upstream,
                                             const PhotometricConfig &cfg) {
    check_pair(i0, i1);
    Grid weighted = upstream;
    for (double &v : weighted.values()) {
        v *= cfg.dssim_weight;
    }
    auto grad = dssim_backward(i0, i1, weighted, cfg);
    const double k = cfg.charbonnier_weight / static_cast<double>(i0.channels());
    for (std::size_t c = 0; c < i0.channels(); ++c) {
        for (std::size_t i = 0; i < upstream.size(); ++i) {
            if (upstream[i] != 0.0) {
                grad[c][i] -= upstream[i] * k *
                              charbonnier_derivative(i0.channel(c)[i] - i1.channel(c)[i],
                                                     cfg.charbonnier_c);
            }
        }
    }
    return grad;
}

} // namespace dualpix
