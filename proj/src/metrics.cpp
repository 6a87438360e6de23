// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/metrics.hpp"

#include "dualpix/affine_fit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dualpix {

namespace {

void check_shapes(const Grid &pred, const Grid &target, const Grid &confidence) {
    if (!pred.same_shape(target) || !pred.same_shape(confidence)) {
        throw DimensionError("metric inputs differ in shape");
    }
}

double total_weight(const Grid &confidence) {
    double w = 0.0;
    for (double c : confidence.values()) {
        if (c > 0.0) {
            w += c;
        }
    }
    if (!(w > 0.0)) {
        throw DomainError("metric needs positive total confidence");
    }
    return w;
}

double weighted_lp(const Grid &pred, const Grid &target, const Grid &confidence,
                   const AffineMap &map, int p) {
    double acc = 0.0;
    double w = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double c = confidence[i];
        if (c > 0.0) {
            const double r = std::abs(target[i] - map(pred[i]));
            acc += c * (p == 1 ? r : r * r);
            w += c;
        }
    }
    return acc / w;
}

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(const Grid &values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

} // namespace

IrlsFit irls_l1_fit(const Grid &pred, const Grid &target, const Grid &confidence, int iterations) {
    check_shapes(pred, target, confidence);
    IrlsFit out;
    out.map = fit_affine(pred, target, confidence);
    out.objective.push_back(weighted_lp(pred, target, confidence, out.map, 1));
    Grid weights(pred.height(), pred.width());
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double c = confidence[i];
            weights[i] = c > 0.0
                             ? c / std::max(std::abs(target[i] - out.map(pred[i])), kIrlsResidualFloor)
                             : 0.0;
        }
        out.map = fit_affine(pred, target, weights);
        out.objective.push_back(weighted_lp(pred, target, confidence, out.map, 1));
    }
    return out;
}

double aiwe(const Grid &pred, const Grid &target, const Grid &confidence, int p) {
    check_shapes(pred, target, confidence);
    total_weight(confidence);
    if (p == 2) {
        const AffineMap map = fit_affine(pred, target, confidence);
        return std::sqrt(weighted_lp(pred, target, confidence, map, 2));
    }
    if (p == 1) {
        return irls_l1_fit(pred, target, confidence).objective.back();
    }
    throw DomainError("AIWE is defined for p = 1 or p = 2");
}

double weighted_spearman(const Grid &pred, const Grid &target, const Grid &confidence) {
    check_shapes(pred, target, confidence);
    const double w = total_weight(confidence);
    const auto rp = average_ranks(pred);
    const auto rt = average_ranks(target);
    double mp = 0.0;
    double mt = 0.0;
    for (std::size_t i = 0; i < rp.size(); ++i) {
        if (confidence[i] > 0.0) {
            mp += confidence[i] * rp[i];
            mt += confidence[i] * rt[i];
        }
    }
    mp /= w;
    mt /= w;
    double cov = 0.0;
    double vp = 0.0;
    double vt = 0.0;
    for (std::size_t i = 0; i < rp.size(); ++i) {
        const double c = confidence[i];
        if (c > 0.0) {
            cov += c * (rp[i] - mp) * (rt[i] - mt);
            vp += c * (rp[i] - mp) * (rp[i] - mp);
            vt += c * (rt[i] - mt) * (rt[i] - mt);
        }
    }
    if (!(vp > 0.0) || !(vt > 0.0)) {
        throw DomainError("rank correlation undefined: zero weighted rank variance");
    }
    const double rho = std::clamp(cov / std::sqrt(vp * vt), -1.0, 1.0);
    return 1.0 - std::abs(rho);
}

double weighted_percentile(const Grid &values, const Grid &weights, double q) {
    if (!values.same_shape(weights)) {
        throw DimensionError("percentile inputs differ in shape");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw DomainError("percentile must lie in [0, 1]");
    }
    std::vector<std::pair<double, double>> items;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (weights[i] > 0.0) {
            items.emplace_back(values[i], weights[i]);
        }
    }
    if (items.empty()) {
        throw DomainError("percentile needs positive total weight");
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const auto &a, const auto &b) { return a.first < b.first; });
    if (items.size() == 1) {
        return items.front().first;
    }
    double total = 0.0;
    for (const auto &it : items) {
        total += it.second;
    }
    const double denom = total - items.back().second;
    double cumulative = 0.0;
    double prev_pos = 0.0;
    double prev_val = items.front().first;
    for (std::size_t k = 0; k < items.size(); ++k) {
        cumulative += items[k].second;
        const double pos = k + 1 == items.size() ? 1.0 : (cumulative - items[k].second) / denom;
        if (q <= pos) {
            if (k == 0 || pos == prev_pos) {
                return items[k].first;
            }
            const double t = (q - prev_pos) / (pos - prev_pos);
            return prev_val + t * (items[k].first - prev_val);
        }
        prev_pos = pos;
        prev_val = items[k].first;
    }
    return items.back().first;
}

double percentile_affine_wrmse(const Grid &pred, const Grid &target, const Grid &confidence) {
    check_shapes(pred, target, confidence);
    total_weight(confidence);
    const double p1 = weighted_percentile(pred, confidence, 1.0 / 3.0);
    const double p2 = weighted_percentile(pred, confidence, 2.0 / 3.0);
    const double t1 = weighted_percentile(target, confidence, 1.0 / 3.0);
    const double t2 = weighted_percentile(target, confidence, 2.0 / 3.0);
    if (!(std::abs(p2 - p1) > 1e-12)) {
        throw DomainError("degenerate percentiles: prediction 1/3 and 2/3 percentiles coincide");
    }
    const double a = (t2 - t1) / (p2 - p1);
    return std::sqrt(weighted_lp(pred, target, confidence, {a, t1 - a * p1}, 2));
}

std::string MetricsRecord::to_json() const {
    return nlohmann::json{{"aiwe1", aiwe1},
                          {"aiwe2", aiwe2},
                          {"one_minus_rho", one_minus_rho},
                          {"pct_wrmse", pct_wrmse},
                          {"geometric_mean", geometric_mean}}
        .dump(2);
}

CropBox center_crop_box(std::size_t height, std::size_t width, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw DomainError("crop fraction must lie in (0, 1]");
    }
    const auto h = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(height)));
    const auto w = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(width)));
    if (h < 2 || w < 2) {
        throw DomainError("crop smaller than 2x2");
    }
    return {(height - h) / 2, (width - w) / 2, h, w};
}

MetricsRecord center_crop_eval(const Grid &pred, const Grid &target, const Grid &confidence,
                               double fraction) {
    check_shapes(pred, target, confidence);
    const CropBox box = center_crop_box(pred.height(), pred.width(), fraction);
    const Grid p = crop(pred, box.y0, box.x0, box.height, box.width);
    const Grid t = crop(target, box.y0, box.x0, box.height, box.width);
    const Grid c = crop(confidence, box.y0, box.x0, box.height, box.width);
    MetricsRecord r;
    r.aiwe1 = aiwe(p, t, c, 1);
    r.aiwe2 = aiwe(p, t, c, 2);
    r.one_minus_rho = weighted_spearman(p, t, c);
    r.pct_wrmse = percentile_affine_wrmse(p, t, c);
    r.geometric_mean = std::cbrt(r.aiwe1 * r.aiwe2 * r.one_minus_rho);
    return r;
}

} // namespace dualpix
