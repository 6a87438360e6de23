// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/gradcheck.hpp"

#include "dualpix/affine_fit.hpp"
#include "dualpix/camera.hpp"
#include "dualpix/losses.hpp"
#include "dualpix/micronet.hpp"
#include "dualpix/photometric.hpp"
#include "dualpix/warp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dualpix {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Grid random_grid(std::size_t h, std::size_t w, Rng &rng, double lo, double hi) {
    Grid g(h, w);
    for (double &v : g.values()) {
        v = uniform(rng, lo, hi);
    }
    return g;
}

Image random_image(std::size_t h, std::size_t w, std::size_t c, Rng &rng) {
    std::vector<Grid> planes;
    for (std::size_t k = 0; k < c; ++k) {
        planes.push_back(random_grid(h, w, rng, 0.1, 0.9));
    }
    return Image(std::move(planes));
}

// Central difference of f() with respect to the scalar behind `x`.
template <typename F> double central(F &&f, double &x, double h) {
    const double orig = x;
    x = orig + h;
    const double fp = f();
    x = orig - h;
    const double fm = f();
    x = orig;
    return (fp - fm) / (2.0 * h);
}

double weighted_sum(const Grid &g, const Grid &u) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        s += g[i] * u[i];
    }
    return s;
}

Rig toy_rig(std::size_t size) {
    return make_plus_rig(size, size, static_cast<double>(size), 0.05);
}

GradCheckReport check_charbonnier(std::uint64_t seed) {
    Rng rng(seed);
    GradComparator cmp("charbonnier", seed, 1e-6, 1e-8);
    for (int i = 0; i < 64; ++i) {
        double x = uniform(rng, -2.0, 2.0);
        const double c = uniform(rng, 0.05, 0.5);
        const double fd = central([&] { return charbonnier(x, c); }, x, 1e-6);
        cmp.add(charbonnier_derivative(x, c), fd);
    }
    return cmp.finish();
}

GradCheckReport check_dssim(std::uint64_t seed) {
    Rng rng(seed);
    GradComparator cmp("dssim", seed, 1e-5, 1e-6);
    const Image p0 = random_image(6, 7, 3, rng);
    Image p1 = random_image(6, 7, 3, rng);
    const Grid u = random_grid(6, 7, rng, -1.0, 1.0);
    const auto grad = dssim_backward(p0, p1, u);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double fd = central([&] { return weighted_sum(dssim(p0, p1), u); },
                                      p1.channel(c)[i], 1e-6);
            cmp.add(grad[c][i], fd);
        }
    }
    return cmp.finish();
}

GradCheckReport check_photometric(std::uint64_t seed) {
    Rng rng(seed);
    GradComparator cmp("photometric_delta", seed, 1e-5, 1e-6);
    const Image i0 = random_image(6, 6, 3, rng);
    Image i1 = random_image(6, 6, 3, rng);
    const Grid u = random_grid(6, 6, rng, -1.0, 1.0);
    const std::vector<std::uint8_t> valid(36, 1);
    const auto grad = photometric_delta_backward(i0, i1, u);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double fd = central(
                [&] { return weighted_sum(photometric_delta(i0, i1, valid).delta, u); },
                i1.channel(c)[i], 1e-6);
            cmp.add(grad[c][i], fd);
        }
    }
    return cmp.finish();
}

GradCheckReport check_bilinear_warp(std::uint64_t seed) {
    Rng rng(seed);
    // Bilinear sampling is piecewise smooth; FD may straddle a cell edge.
    GradComparator cmp("bilinear_warp", seed, 1e-4, 1e-6, 0.99);
    const std::size_t n = 10;
    const Rig rig = toy_rig(n);
    const DepthRange range;
    const Image src = random_image(n, n, 3, rng);
    Grid depth = random_grid(n, n, rng, 0.2, 0.8);
    std::vector<Grid> u;
    for (int c = 0; c < 3; ++c) {
        u.push_back(random_grid(n, n, rng, -1.0, 1.0));
    }
    const std::size_t target = 1 + static_cast<std::size_t>(seed % 4);
    auto loss = [&] {
        const WarpField w = induced_warp(depth, range, rig[0], rig[target]);
        const SampledImage s = bilinear_sample(src, w);
        double total = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < depth.size(); ++i) {
                if (s.valid[i]) {
                    total += u[c][i] * s.image.channel(c)[i];
                }
            }
        }
        return total;
    };
    const Grid grad = warp_depth_gradient(src, depth, range, rig[0], rig[target], u);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        cmp.add(grad[i], central(loss, depth[i], 1e-7));
    }
    return cmp.finish();
}

GradCheckReport check_fit(std::uint64_t seed, bool scale_only) {
    Rng rng(seed);
    Grid pred = random_grid(8, 8, rng, 0.0, 1.0);
    const Grid target = random_grid(8, 8, rng, 0.0, 1.0);
    Grid weight = random_grid(8, 8, rng, 0.0, 1.0);
    weight[3] = 0.0;
    const DifferentiableFit fit = scale_only ? fit_scale_differentiable(pred, target, weight)
                                             : fit_affine_differentiable(pred, target, weight);
    // Floor relative to the gradient scale: lightly weighted pixels have
    // derivatives near the round-off level of the difference quotient.
    double scale = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        scale = std::max({scale, std::abs(fit.da[i]), scale_only ? 0.0 : std::abs(fit.db[i])});
    }
    GradComparator cmp(scale_only ? "scale_solve" : "affine_solve", seed, 1e-5, 1e-3 * scale);
    auto solve = [&] {
        return scale_only ? fit_scale(pred, target, weight) : fit_affine(pred, target, weight);
    };
    for (std::size_t i = 0; i < pred.size(); ++i) {
        cmp.add(fit.da[i], central([&] { return solve().a; }, pred[i], 1e-6));
        if (!scale_only) {
            cmp.add(fit.db[i], central([&] { return solve().b; }, pred[i], 1e-6));
        }
    }
    return cmp.finish();
}

struct ToyScene {
    std::size_t size;
    ViewSupervision vs;
    Grid pred;
    Grid target;
    Grid confidence;
};

ToyScene toy_scene(std::uint64_t seed, std::size_t size, std::size_t levels) {
    Rng rng(seed);
    const Image ref = random_image(size, size, 3, rng);
    std::array<Image, 4> nb;
    for (auto &img : nb) {
        img = random_image(size, size, 3, rng);
    }
    ViewSupervision vs(ref, nb, toy_rig(size), DepthRange(), levels);
    Grid pred = random_grid(size, size, rng, 0.2, 0.8);
    Grid target = random_grid(size, size, rng, 0.0, 1.0);
    Grid conf = random_grid(size, size, rng, 0.3, 1.0);
    conf[0] = 0.0;
    return {size, std::move(vs), std::move(pred), std::move(target), std::move(conf)};
}

// The per-pixel minimum over neighbours is non-smooth at ties, hence the 95% rule.
GradCheckReport check_view_supervision(std::uint64_t seed) {
    ToyScene t = toy_scene(seed, 8, 3);
    GradComparator cmp("view_supervision", seed, 1e-3, 1e-6, 0.95);
    const LossResult r = t.vs.evaluate(t.pred);
    for (std::size_t i = 0; i < t.pred.size(); ++i) {
        cmp.add(r.gradient[i],
                central([&] { return t.vs.evaluate(t.pred, false).value; }, t.pred[i], 1e-7));
    }
    return cmp.finish();
}

GradCheckReport check_assisted(std::uint64_t seed) {
    ToyScene t = toy_scene(seed, 8, 3);
    GradComparator cmp("assisted_loss", seed, 1e-3, 1e-6, 0.95);
    const Invariance mode = seed % 2 == 0 ? Invariance::affine : Invariance::scale;
    const AssistedLoss r = assisted_loss(t.pred, t.target, t.confidence, t.vs, mode);
    for (std::size_t i = 0; i < t.pred.size(); ++i) {
        cmp.add(r.loss.gradient[i], central(
                                        [&] {
                                            return assisted_loss(t.pred, t.target, t.confidence,
                                                                 t.vs, mode, false)
                                                .loss.value;
                                        },
                                        t.pred[i], 1e-7));
    }
    return cmp.finish();
}

GradCheckReport check_folded(std::uint64_t seed) {
    ToyScene t = toy_scene(seed, 8, 3);
    Rng rng(seed ^ 0x5bd1e995ULL);
    GradComparator cmp("folded_latents", seed, 1e-4, 1e-6, 0.95);
    FoldedLatents lat;
    lat.a_hat = uniform(rng, -1.0, 1.0);
    lat.b = uniform(rng, -0.2, 0.2);
    const FoldedLoss r = folded_loss(t.pred, lat, t.vs);
    auto value = [&] { return folded_loss(t.pred, lat, t.vs, false).loss.value; };
    cmp.add(r.grad_a_hat, central(value, lat.a_hat, 1e-7));
    cmp.add(r.grad_b, central(value, lat.b, 1e-7));
    for (std::size_t i = 0; i < t.pred.size(); ++i) {
        cmp.add(r.loss.gradient[i], central(value, t.pred[i], 1e-7));
    }
    return cmp.finish();
}

FeatureMap random_input(std::size_t size, Rng &rng) {
    FeatureMap x(MicroNet::kInputChannels, size, size);
    for (double &v : x.data) {
        v = uniform(rng, 0.0, 1.0);
    }
    return x;
}

// FD of a piecewise-linear network may straddle a leaky-ReLU kink; such a
// coordinate is re-measured with a much smaller step before it counts.
template <typename F>
void compare_with_retry(GradComparator &cmp, F &&loss, double &x, double analytic, double h) {
    double fd = central(loss, x, h);
    if (!cmp.accepts(analytic, fd)) {
        fd = central(loss, x, h / 64.0);
    }
    cmp.add(analytic, fd);
}

GradCheckReport check_micronet(std::uint64_t seed) {
    Rng rng(seed);
    GradComparator cmp("micronet_backward", seed, 1e-4, 1e-5);
    MicroNet net;
    net.initialize(seed);
    // Larger head weights so every parameter carries a measurable gradient.
    auto params = net.parameters();
    for (double &w : params[8]->data) {
        w *= 10.0;
    }
    for (double &w : params[10]->data) {
        w *= 10.0;
    }
    net.mark_updated();
    FeatureMap x = random_input(8, rng);
    const std::array<Grid, 2> u{random_grid(4, 4, rng, -1.0, 1.0), random_grid(2, 2, rng, -1.0, 1.0)};
    auto loss = [&] {
        const auto c = net.forward(x);
        return weighted_sum(c.outputs[0], u[0]) + weighted_sum(c.outputs[1], u[1]);
    };
    const auto grads = net.backward(net.forward(x), u);
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < params[p]->size(); ++k) {
            compare_with_retry(cmp, loss, params[p]->data[k], grads.params[p].data[k], 1e-5);
        }
    }
    for (std::size_t k = 0; k < x.data.size(); ++k) {
        compare_with_retry(cmp, loss, x.data[k], grads.input.data[k], 1e-5);
    }
    return cmp.finish();
}

// Network -> affine solve -> warp -> photometric, on both heads.
GradCheckReport check_training_loss(std::uint64_t seed) {
    Rng rng(seed);
    GradComparator cmp("training_loss", seed, 1e-3, 1e-6, 0.95);
    const std::size_t n = 16; // heads at 8x8 and 4x4, the smallest pyramid level
    const Image ref = random_image(n, n, 3, rng);
    std::array<Image, 4> nb;
    for (auto &img : nb) {
        img = random_image(n, n, 3, rng);
    }
    const ViewSupervision vs(ref, nb, toy_rig(n), DepthRange(), 1);
    const std::array<Grid, 2> target{random_grid(8, 8, rng, 0.0, 1.0), random_grid(4, 4, rng, 0.0, 1.0)};
    const std::array<Grid, 2> conf{random_grid(8, 8, rng, 0.3, 1.0), random_grid(4, 4, rng, 0.3, 1.0)};
    MicroNet net;
    net.initialize(seed + 17);
    auto params = net.parameters();
    for (double &w : params[8]->data) {
        w *= 10.0;
    }
    for (double &w : params[10]->data) {
        w *= 10.0;
    }
    net.mark_updated();
    const FeatureMap x = random_input(n, rng);

    auto loss = [&] {
        const auto c = net.forward(x);
        double total = 0.0;
        for (std::size_t s = 0; s < 2; ++s) {
            total += assisted_loss(c.outputs[s], target[s], conf[s], vs, Invariance::affine, false)
                         .loss.value;
        }
        return total;
    };
    const auto cache = net.forward(x);
    std::array<Grid, 2> upstream;
    for (std::size_t s = 0; s < 2; ++s) {
        upstream[s] =
            assisted_loss(cache.outputs[s], target[s], conf[s], vs, Invariance::affine).loss.gradient;
    }
    const auto grads = net.backward(cache, upstream);

    // A random subset of coordinates keeps the check fast.
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < params[p]->size(); ++k) {
            coords.emplace_back(p, k);
        }
    }
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min<std::size_t>(coords.size(), 300));
    for (const auto &[p, k] : coords) {
        compare_with_retry(cmp, loss, params[p]->data[k], grads.params[p].data[k], 1e-6);
    }
    return cmp.finish();
}

} // namespace

GradComparator::GradComparator(std::string name, std::uint64_t seed, double tolerance,
                               double floor, double min_fraction)
    : floor_(floor) {
    report_.name = std::move(name);
    report_.seed = seed;
    report_.tolerance = tolerance;
    report_.min_fraction = min_fraction;
}

bool GradComparator::accepts(double analytic, double numeric) const {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor_});
    return std::abs(analytic - numeric) / denom <= report_.tolerance;
}

void GradComparator::add(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor_});
    const double err = std::abs(analytic - numeric) / denom;
    ++report_.checked;
    if (err <= report_.tolerance) {
        ++report_.within;
    }
    if (!(err <= report_.max_error)) {
        report_.max_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
    }
}

GradCheckReport GradComparator::finish() const {
    GradCheckReport r = report_;
    r.passed = r.checked > 0 && static_cast<double>(r.within) >=
                                    r.min_fraction * static_cast<double>(r.checked);
    return r;
}

const std::vector<GradCheck> &registered_gradchecks() {
    static const std::vector<GradCheck> checks{
        {"charbonnier", check_charbonnier},
        {"dssim", check_dssim},
        {"photometric_delta", check_photometric},
        {"bilinear_warp", check_bilinear_warp},
        {"affine_solve", [](std::uint64_t s) { return check_fit(s, false); }},
        {"scale_solve", [](std::uint64_t s) { return check_fit(s, true); }},
        {"view_supervision", check_view_supervision},
        {"assisted_loss", check_assisted},
        {"folded_latents", check_folded},
        {"micronet_backward", check_micronet},
        {"training_loss", check_training_loss},
    };
    return checks;
}

std::vector<GradCheckReport> run_gradchecks(std::uint64_t seed, std::size_t count,
                                            const std::vector<std::string> &only) {
    std::vector<GradCheckReport> out;
    for (const GradCheck &check : registered_gradchecks()) {
        if (!only.empty() && std::find(only.begin(), only.end(), check.name) == only.end()) {
            continue;
        }
        for (std::size_t i = 0; i < count; ++i) {
            out.push_back(check.run(seed + i));
        }
    }
    return out;
}

} // namespace dualpix
