// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/metrics.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>

using namespace dualpix;

namespace {

// Exact weighted L1 line fit: an optimum passes through two of the points.
double brute_force_l1(const Grid &pred, const Grid &target, const Grid &conf) {
    double wsum = 0.0;
    for (double c : conf.values()) {
        wsum += c;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = i + 1; j < pred.size(); ++j) {
            if (pred[i] == pred[j]) {
                continue;
            }
            const double a = (target[j] - target[i]) / (pred[j] - pred[i]);
            const double b = target[i] - a * pred[i];
            double e = 0.0;
            for (std::size_t k = 0; k < pred.size(); ++k) {
                e += conf[k] * std::abs(target[k] - (a * pred[k] + b));
            }
            best = std::min(best, e / wsum);
        }
    }
    return best;
}

double numpy_linear_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

TEST(Metrics, AffineTransformScoresZero) {
    std::mt19937_64 rng(1);
    const Grid t = testutil::random_grid(10, 10, rng);
    const Grid c = testutil::random_grid(10, 10, rng, 0.1, 1.0);
    Grid p(10, 10);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = 3.0 * t[i] - 0.7;
    }
    EXPECT_LT(aiwe(p, t, c, 1), 1e-9);
    EXPECT_LT(aiwe(p, t, c, 2), 1e-9);
    EXPECT_LT(percentile_affine_wrmse(p, t, c), 1e-9);
    EXPECT_LT(weighted_spearman(p, t, c), 1e-12);
}

TEST(Metrics, SingleOutlierMatchesBruteForce) {
    std::mt19937_64 rng(2);
    const Grid t = testutil::random_grid(10, 10, rng);
    Grid p = t;
    p[37] += 0.5;
    const Grid c(10, 10, 1.0);
    EXPECT_NEAR(aiwe(p, t, c, 1), brute_force_l1(p, t, c), 1e-4);
}

TEST(Metrics, ZeroConfidencePixelsAreIgnored) {
    std::mt19937_64 rng(3);
    const Grid t = testutil::random_grid(8, 8, rng);
    const Grid p = testutil::random_grid(8, 8, rng);
    Grid c = testutil::random_grid(8, 8, rng, 0.1, 1.0);
    for (std::size_t i = 0; i < 8; ++i) {
        c[i] = 0.0;
    }
    Grid corrupted = p;
    for (std::size_t i = 0; i < 8; ++i) {
        corrupted[i] = 1e6 * (static_cast<double>(i) - 3.5);
    }
    EXPECT_DOUBLE_EQ(aiwe(p, t, c, 1), aiwe(corrupted, t, c, 1));
    EXPECT_DOUBLE_EQ(aiwe(p, t, c, 2), aiwe(corrupted, t, c, 2));
    EXPECT_DOUBLE_EQ(percentile_affine_wrmse(p, t, c), percentile_affine_wrmse(corrupted, t, c));
}

TEST(Metrics, AiweIsAffineInvariantProperty) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const Grid t = testutil::random_grid(9, 9, rng);
    const Grid p = testutil::random_grid(9, 9, rng);
    const Grid c = testutil::random_grid(9, 9, rng);
    const double e1 = aiwe(p, t, c, 1);
    const double e2 = aiwe(p, t, c, 2);
    for (int k = 0; k < 50; ++k) {
        double a = u(rng);
        if (std::abs(a) < 0.05) {
            a = 0.5;
        }
        const double b = u(rng);
        Grid q(9, 9);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] = a * p[i] + b;
        }
        EXPECT_NEAR(aiwe(q, t, c, 1), e1, 1e-9 * e1);
        EXPECT_NEAR(aiwe(q, t, c, 2), e2, 1e-9 * e2);
        EXPECT_GE(e1, 0.0);
    }
}

TEST(Metrics, IrlsNeverIncreasesObjective) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        std::mt19937_64 rng(seed);
        const Grid t = testutil::random_grid(10, 10, rng);
        const Grid p = testutil::random_grid(10, 10, rng);
        const Grid c = testutil::random_grid(10, 10, rng);
        const IrlsFit fit = irls_l1_fit(p, t, c);
        ASSERT_EQ(fit.objective.size(), static_cast<std::size_t>(kIrlsIterations + 1));
        for (std::size_t k = 1; k < fit.objective.size(); ++k) {
            EXPECT_LE(fit.objective[k], fit.objective[k - 1] * (1.0 + 1e-12)) << seed;
        }
    }
}

TEST(Metrics, AiweErrors) {
    const Grid t(3, 3, 0.5);
    EXPECT_THROW(aiwe(Grid(3, 3, 0.2), t, Grid(3, 3, 1.0), 1), SingularFitError);
    std::mt19937_64 rng(5);
    EXPECT_THROW(aiwe(testutil::random_grid(3, 3, rng), t, Grid(3, 3, 0.0), 2), DomainError);
    EXPECT_THROW(aiwe(testutil::random_grid(3, 3, rng), t, Grid(3, 3, 1.0), 3), DomainError);
}

TEST(Metrics, SpearmanExamples) {
    const Grid c(1, 3, 1.0);
    const Grid gt(1, 3, std::vector<double>{1, 2, 3});
    const Grid pr(1, 3, std::vector<double>{2, 1, 3});
    EXPECT_NEAR(weighted_spearman(pr, gt, c), 0.5, 1e-12);
    Grid neg = gt;
    for (double &v : neg.values()) {
        v = -v;
    }
    EXPECT_NEAR(weighted_spearman(neg, gt, c), 0.0, 1e-12);
    EXPECT_THROW(weighted_spearman(Grid(1, 3, 0.4), gt, c), DomainError);
}

TEST(Metrics, SpearmanMonotoneInvarianceProperty) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        std::mt19937_64 rng(seed);
        const Grid t = testutil::random_grid(8, 8, rng);
        const Grid p = testutil::random_grid(8, 8, rng);
        const Grid c = testutil::random_grid(8, 8, rng);
        // random increasing piecewise-linear map with 4 knots on [0, 1]
        std::uniform_real_distribution<double> u(0.1, 2.0);
        const double s[4] = {u(rng), u(rng), u(rng), u(rng)};
        auto f = [&](double x) {
            double y = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double lo = 0.25 * k;
                y += s[k] * std::clamp(x - lo, 0.0, 0.25);
            }
            return y;
        };
        Grid fp = p;
        Grid ft = t;
        for (std::size_t i = 0; i < p.size(); ++i) {
            fp[i] = f(p[i]);
            ft[i] = std::exp(3.0 * t[i]);
        }
        EXPECT_NEAR(weighted_spearman(fp, ft, c), weighted_spearman(p, t, c), 1e-12);
        EXPECT_LT(weighted_spearman(fp, p, c), 1e-9);
    }
}

TEST(Metrics, PercentileMatchesNumpyForUniformWeights) {
    std::mt19937_64 rng(6);
    const Grid v = testutil::random_grid(1, 11, rng);
    const Grid w(1, 11, 2.5);
    std::vector<double> raw(v.values().begin(), v.values().end());
    for (double q : {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0}) {
        EXPECT_NEAR(weighted_percentile(v, w, q), numpy_linear_percentile(raw, q), 1e-12);
    }
}

TEST(Metrics, PercentileWrmseNegatedTruthMatchesOracle) {
    std::mt19937_64 rng(7);
    const Grid t = testutil::random_grid(6, 7, rng);
    Grid p = t;
    for (double &v : p.values()) {
        v = -v;
    }
    const Grid c(6, 7, 1.0);
    std::vector<double> pv(p.values().begin(), p.values().end());
    std::vector<double> tv(t.values().begin(), t.values().end());
    const double p1 = numpy_linear_percentile(pv, 1.0 / 3.0);
    const double p2 = numpy_linear_percentile(pv, 2.0 / 3.0);
    const double t1 = numpy_linear_percentile(tv, 1.0 / 3.0);
    const double t2 = numpy_linear_percentile(tv, 2.0 / 3.0);
    const double a = (t2 - t1) / (p2 - p1);
    double se = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = t[i] - (a * (p[i] - p1) + t1);
        se += r * r;
    }
    const double expected = std::sqrt(se / static_cast<double>(p.size()));
    EXPECT_GT(expected, 0.01);
    EXPECT_NEAR(percentile_affine_wrmse(p, t, c), expected, 1e-12);

    Grid c2 = testutil::random_grid(6, 7, rng, 0.1, 1.0);
    Grid c3 = c2;
    for (double &v : c3.values()) {
        v *= 2.0;
    }
    EXPECT_NEAR(percentile_affine_wrmse(p, t, c2), percentile_affine_wrmse(p, t, c3), 1e-12);
    EXPECT_THROW(percentile_affine_wrmse(Grid(6, 7, 0.3), t, c), DomainError);
}

TEST(Metrics, CenterCrop) {
    const CropBox box = center_crop_box(504, 672, kDefaultCropFraction);
    EXPECT_EQ(box.height, 384u);
    EXPECT_EQ(box.width, 512u);
    EXPECT_EQ(box.y0, 60u);
    EXPECT_EQ(box.x0, 80u);
    EXPECT_THROW(center_crop_box(4, 4, 0.2), DomainError);
    EXPECT_THROW(center_crop_box(4, 4, 1.5), DomainError);

    std::mt19937_64 rng(8);
    const Grid t = testutil::random_grid(20, 20, rng);
    const Grid p = testutil::random_grid(20, 20, rng);
    const Grid c = testutil::random_grid(20, 20, rng);
    const MetricsRecord full = center_crop_eval(p, t, c, 1.0);
    EXPECT_DOUBLE_EQ(full.aiwe1, aiwe(p, t, c, 1));
    EXPECT_DOUBLE_EQ(full.aiwe2, aiwe(p, t, c, 2));
    EXPECT_DOUBLE_EQ(full.one_minus_rho, weighted_spearman(p, t, c));
    EXPECT_DOUBLE_EQ(full.pct_wrmse, percentile_affine_wrmse(p, t, c));
    EXPECT_NEAR(full.geometric_mean, std::cbrt(full.aiwe1 * full.aiwe2 * full.one_minus_rho), 1e-15);

    const CropBox inner = center_crop_box(20, 20, 0.5);
    Grid q = p;
    for (std::size_t y = 0; y < 20; ++y) {
        for (std::size_t x = 0; x < 20; ++x) {
            if (y < inner.y0 || y >= inner.y0 + inner.height || x < inner.x0 ||
                x >= inner.x0 + inner.width) {
                q(y, x) = 99.0;
            }
        }
    }
    const MetricsRecord a = center_crop_eval(p, t, c, 0.5);
    const MetricsRecord b = center_crop_eval(q, t, c, 0.5);
    EXPECT_EQ(a.aiwe1, b.aiwe1);
    EXPECT_EQ(a.one_minus_rho, b.one_minus_rho);
    EXPECT_EQ(a.pct_wrmse, b.pct_wrmse);

    const auto j = nlohmann::json::parse(a.to_json());
    for (const char *key : {"aiwe1", "aiwe2", "one_minus_rho", "pct_wrmse", "geometric_mean"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
}

} // namespace
