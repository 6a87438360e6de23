// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/mvs.hpp"

#include "dualpix/parallel.hpp"
#include "dualpix/warp.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dualpix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

std::vector<double> plane_depths(std::size_t n, const DepthRange &range) {
    if (n < 2) {
        throw DomainError("plane sweep needs at least two planes");
    }
    std::vector<double> depths(n);
    const double step = range.inv_span() / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
        depths[k] = 1.0 / (range.inv_near() - static_cast<double>(k) * step);
    }
    depths.back() = range.z_far;
    return depths;
}

double plane_to_normalized(std::size_t k, std::size_t n) {
    return 1.0 - static_cast<double>(k) / static_cast<double>(n - 1);
}

CostVolume::CostVolume(std::size_t height, std::size_t width, std::vector<double> depths)
    : height_(height), width_(width), depths_(std::move(depths)),
      costs_(height * width * depths_.size(), 0.0) {}

CostVolume sweep_cost_volume(const Image &reference, const CameraModel &reference_camera,
                             std::span<const StereoView> neighbors,
                             const std::vector<double> &depths) {
    if (depths.size() < 2) {
        throw DomainError("plane sweep needs at least two planes");
    }
    for (const auto &n : neighbors) {
        if (!n.image->same_shape(reference)) {
            throw DimensionError("sweep neighbour differs in shape from the reference");
        }
    }
    const std::size_t h = reference.height();
    const std::size_t w = reference.width();
    const std::size_t np = depths.size();
    CostVolume volume(h, w, depths);
    // Plane depths expressed as normalized inverse depth over their own span.
    const DepthRange span(std::min(depths.front(), depths.back()),
                          std::max(depths.front(), depths.back()));

    parallel_for(np, [&](std::size_t k) {
        const double d = (1.0 / depths[k] - span.inv_far()) / span.inv_span();
        const Grid plane(h, w, d);
        std::vector<Grid> costs;
        std::vector<std::vector<std::uint8_t>> valid;
        for (const auto &n : neighbors) {
            const WarpField warp = induced_warp(plane, span, reference_camera, n.camera);
            const SampledImage sampled = bilinear_sample(*n.image, warp);
            Grid sad(h, w);
            for (std::size_t c = 0; c < reference.channels(); ++c) {
                const auto ref = reference.channel(c).values();
                const auto wrp = sampled.image.channel(c).values();
                for (std::size_t i = 0; i < sad.size(); ++i) {
                    sad[i] += std::abs(ref[i] - wrp[i]);
                }
            }
            costs.push_back(std::move(sad));
            valid.push_back(sampled.valid);
        }
        for (std::size_t i = 0; i < h * w; ++i) {
            double best = kInf;
            double second = kInf;
            for (std::size_t j = 0; j < costs.size(); ++j) {
                if (!valid[j][i]) {
                    continue;
                }
                const double c = costs[j][i];
                if (c < best) {
                    second = best;
                    best = c;
                } else if (c < second) {
                    second = c;
                }
            }
            volume(i / w, i % w, k) = std::isfinite(second) ? best + second : kInf;
        }
    });
    return volume;
}

CostVolume guided_bilateral_filter(const CostVolume &volume, const Grid &guide,
                                   const BilateralParams &params) {
    if (guide.height() != volume.height() || guide.width() != volume.width()) {
        throw DimensionError("guide image does not match the cost volume");
    }
    const long h = static_cast<long>(volume.height());
    const long w = static_cast<long>(volume.width());
    const long r = params.radius;
    const std::size_t np = volume.planes();
    const double inv_2s2 = 1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
    const double inv_2r2 = 1.0 / (2.0 * params.sigma_range * params.sigma_range);
    std::vector<double> spatial(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    for (long dy = -r; dy <= r; ++dy) {
        for (long dx = -r; dx <= r; ++dx) {
            spatial[static_cast<std::size_t>((dy + r) * (2 * r + 1) + dx + r)] =
                std::exp(-static_cast<double>(dx * dx + dy * dy) * inv_2s2);
        }
    }
    CostVolume out(volume.height(), volume.width(), volume.depths());
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t yu) {
        const long y = static_cast<long>(yu);
        std::vector<double> acc(np);
        std::vector<double> norm(np);
        for (long x = 0; x < w; ++x) {
            std::fill(acc.begin(), acc.end(), 0.0);
            std::fill(norm.begin(), norm.end(), 0.0);
            const double gp = 255.0 * guide(yu, static_cast<std::size_t>(x));
            for (long yy = std::max(0L, y - r); yy <= std::min(h - 1, y + r); ++yy) {
                for (long xx = std::max(0L, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                    const double diff =
                        255.0 * guide(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) - gp;
                    const double weight =
                        spatial[static_cast<std::size_t>((yy - y + r) * (2 * r + 1) + xx - x + r)] *
                        std::exp(-diff * diff * inv_2r2);
                    const auto costs =
                        volume.pixel(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                    for (std::size_t k = 0; k < np; ++k) {
                        const double c = costs[k];
                        if (c != kInf) {
                            acc[k] += weight * c;
                            norm[k] += weight;
                        }
                    }
                }
            }
            auto dst = out.pixel(yu, static_cast<std::size_t>(x));
            for (std::size_t k = 0; k < np; ++k) {
                dst[k] = norm[k] > 0.0 ? acc[k] / norm[k] : kInf;
            }
        }
    });
    return out;
}

PlaneDepth argmin_depth(const CostVolume &volume, const DepthRange &range) {
    const std::size_t h = volume.height();
    const std::size_t w = volume.width();
    PlaneDepth out{InverseDepthMap{Grid(h, w), range}, std::vector<std::uint8_t>(h * w, 0),
                   Grid(h, w)};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto costs = volume.pixel(y, x);
            std::size_t best = costs.size();
            for (std::size_t k = 0; k < costs.size(); ++k) {
                if (costs[k] != kInf && (best == costs.size() || costs[k] < costs[best])) {
                    best = k;
                }
            }
            if (best == costs.size()) {
                out.invalid[y * w + x] = 1;
                continue;
            }
            out.plane_index(y, x) = static_cast<double>(best);
            out.depth.grid(y, x) = plane_to_normalized(best, costs.size());
        }
    }
    return out;
}

Grid lr_consistency_confidence(const InverseDepthMap &reference_depth,
                               const CameraModel &reference_camera,
                               std::span<const Grid> neighbor_depths,
                               std::span<const CameraModel> neighbor_cameras, double sigma) {
    if (neighbor_depths.size() != neighbor_cameras.size()) {
        throw DimensionError("one camera per neighbour depth map is required");
    }
    const Grid &dref = reference_depth.grid;
    const std::size_t n = dref.size();
    std::vector<double> best(n, 0.0);
    std::vector<double> second(n, 0.0);
    const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t j = 0; j < neighbor_depths.size(); ++j) {
        if (!neighbor_depths[j].same_shape(dref)) {
            throw DimensionError("neighbour depth map differs in shape");
        }
        const WarpField warp = induced_warp(reference_depth, reference_camera, neighbor_cameras[j]);
        const Grid sampled = bilinear_sample(neighbor_depths[j], warp);
        for (std::size_t i = 0; i < n; ++i) {
            double c = 0.0;
            if (warp.valid[i]) {
                const double diff = dref[i] - sampled[i];
                c = std::exp(-diff * diff * inv_2s2);
            }
            if (c > best[i]) {
                second[i] = best[i];
                best[i] = c;
            } else if (c > second[i]) {
                second[i] = c;
            }
        }
    }
    Grid conf(dref.height(), dref.width());
    for (std::size_t i = 0; i < n; ++i) {
        conf[i] = best[i] * second[i];
    }
    return conf;
}

Grid local_variance(const Grid &gray, int radius) {
    const long h = static_cast<long>(gray.height());
    const long w = static_cast<long>(gray.width());
    Grid out(gray.height(), gray.width());
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double s = 0.0;
            double s2 = 0.0;
            double n = 0.0;
            for (long yy = std::max(0L, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
                for (long xx = std::max(0L, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
                    const double v = gray(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                    s += v;
                    s2 += v * v;
                    n += 1.0;
                }
            }
            const double mean = s / n;
            out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                std::max(0.0, s2 / n - mean * mean);
        }
    }
    return out;
}

std::string GroundTruthReport::to_json() const {
    return nlohmann::json{{"coverage", coverage},
                          {"mean_confidence", mean_confidence},
                          {"textureless_fraction", textureless_fraction},
                          {"low_texture", low_texture},
                          {"invalid_pixels", invalid_pixels},
                          {"runtime_s", runtime_s}}
        .dump(2);
}

GroundTruth ground_truth_pipeline(const std::array<Image, 5> &views, const Rig &rig,
                                  const DepthRange &range, const GroundTruthConfig &config) {
    const auto start = std::chrono::steady_clock::now();
    if (config.downscale == 0 || (config.downscale & (config.downscale - 1)) != 0) {
        throw ConfigError("downscale must be a power of two");
    }
    std::array<Image, 5> imgs = views;
    Rig cams = rig;
    for (std::size_t f = config.downscale; f > 1; f /= 2) {
        for (auto &im : imgs) {
            im = downsample2(im);
        }
        cams = cams.scaled(0.5);
    }
    for (const auto &im : imgs) {
        if (!im.same_shape(imgs[0])) {
            throw DimensionError("capture views differ in shape");
        }
    }
    const auto depths = plane_depths(config.planes, range);

    std::array<Grid, 5> view_depth;
    std::size_t invalid_ref = 0;
    for (std::size_t v = 0; v < 5; ++v) {
        std::vector<StereoView> others;
        for (std::size_t u = 0; u < 5; ++u) {
            if (u != v) {
                others.push_back({&imgs[u], cams[u]});
            }
        }
        const CostVolume raw = sweep_cost_volume(imgs[v], cams[v], others, depths);
        const CostVolume filtered = guided_bilateral_filter(raw, to_gray(imgs[v]), config.bilateral);
        PlaneDepth pd = argmin_depth(filtered, range);
        if (v == 0) {
            invalid_ref = static_cast<std::size_t>(
                std::count(pd.invalid.begin(), pd.invalid.end(), std::uint8_t{1}));
        }
        view_depth[v] = std::move(pd.depth.grid);
    }

    GroundTruth gt;
    gt.depth = InverseDepthMap{view_depth[0], range};
    const std::array<CameraModel, 4> neighbor_cams = {cams[1], cams[2], cams[3], cams[4]};
    const std::array<Grid, 4> neighbor_depths = {view_depth[1], view_depth[2], view_depth[3],
                                                 view_depth[4]};
    gt.confidence = lr_consistency_confidence(gt.depth, cams[0], neighbor_depths, neighbor_cams);

    const Grid var = local_variance(to_gray(imgs[0]), 9);
    std::size_t flat = 0;
    std::size_t covered = 0;
    double conf_sum = 0.0;
    for (std::size_t i = 0; i < var.size(); ++i) {
        flat += var[i] <= 1e-4 ? 1 : 0;
        covered += gt.confidence[i] > 0.5 ? 1 : 0;
        conf_sum += gt.confidence[i];
    }
    const auto n = static_cast<double>(var.size());
    gt.report.coverage = static_cast<double>(covered) / n;
    gt.report.mean_confidence = conf_sum / n;
    gt.report.textureless_fraction = static_cast<double>(flat) / n;
    gt.report.low_texture = gt.report.textureless_fraction > 0.5;
    gt.report.invalid_pixels = invalid_ref;
    gt.report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return gt;
}

} // namespace dualpix
