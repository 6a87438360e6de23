// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/checkpoint.hpp"
#include "dualpix/dataset.hpp"
#include "dualpix/gradcheck.hpp"
#include "dualpix/raster_io.hpp"
#include "dualpix/trainer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace dualpix;
using dualpix::testutil::TempDir;

namespace {

std::vector<CaptureData> tiny_dataset(std::size_t count, std::size_t size = 16) {
    std::vector<CaptureData> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(testutil::small_capture(100 + i, size));
    }
    return out;
}

std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---- dataset ----

TEST(Dataset, SceneJsonLoads) {
    TempDir dir("scene");
    std::mt19937_64 rng(1);
    write_png(dir.path() / "bg.png", testutil::random_image(40, 40, 3, rng));
    write_png(dir.path() / "fg.png", testutil::random_image(40, 40, 3, rng));
    Image mask(40, 40, 1, 0.0);
    for (std::size_t y = 10; y < 30; ++y) {
        for (std::size_t x = 10; x < 30; ++x) {
            mask(0, y, x) = 1.0;
        }
    }
    write_png(dir.path() / "mask.png", mask);
    std::ofstream(dir.path() / "scene.json") << R"({
      "height": 24, "width": 24, "range": {"near": 0.2, "far": 100},
      "lens": {"aperture": 0.002, "focal_length": 0.004, "focus_distance": 1.0,
               "disparity_gain": 187500},
      "rig": {"focal_px": 24, "baseline_m": 0.02},
      "layers": [{"texture": "bg.png", "depth_m": 2.0, "mask": null},
                 {"texture": "fg.png", "depth_m": 0.7, "mask": "mask.png"}]})";
    const SceneSpec spec = load_scene_json(dir.path() / "scene.json");
    EXPECT_EQ(spec.scene.height, 24u);
    ASSERT_EQ(spec.scene.layers.size(), 2u);
    EXPECT_TRUE(spec.scene.layers[1].mask.has_value());
    EXPECT_DOUBLE_EQ(spec.lens.focus_distance, 1.0);
    EXPECT_NEAR(spec.rig[4].center().x(), 0.02, 1e-15);

    std::ofstream(dir.path() / "broken.json") << R"({"height": 4})";
    EXPECT_THROW(load_scene_json(dir.path() / "broken.json"), ConfigError);
}

TEST(Dataset, RandomScenesAreSeeded) {
    std::mt19937_64 a(5);
    std::mt19937_64 b(5);
    const SceneSpec s1 = random_scene({}, a);
    const SceneSpec s2 = random_scene({}, b);
    ASSERT_EQ(s1.scene.layers.size(), s2.scene.layers.size());
    EXPECT_GE(s1.scene.layers.size(), 4u); // background + at least 3 foreground layers
    for (std::size_t i = 0; i < s1.scene.layers.size(); ++i) {
        EXPECT_EQ(s1.scene.layers[i].depth_m, s2.scene.layers[i].depth_m);
        EXPECT_EQ(s1.scene.layers[i].texture, s2.scene.layers[i].texture);
    }
}

TEST(Dataset, CaptureDirectoryRoundTrip) {
    TempDir dir("capture");
    const CaptureData d = testutil::small_capture(3, 16);
    write_capture(dir.path() / "capture_0000", d);
    for (const char *f : {"center.png", "dp_left.png", "dp_right.png", "top.png", "bottom.png",
                          "left.png", "right.png", "rig.json", "gt_depth.pfm",
                          "gt_confidence.pfm", "capture.json"}) {
        EXPECT_TRUE(std::filesystem::exists(dir.path() / "capture_0000" / f)) << f;
    }
    const CaptureData back = read_capture(dir.path() / "capture_0000");
    EXPECT_LE(testutil::max_abs_diff(back.center, d.center), 0.5 / 65535.0 + 1e-12);
    EXPECT_LE(testutil::max_abs_diff(back.dp_left, d.dp_left), 0.5 / 65535.0 + 1e-12);
    EXPECT_LE(testutil::max_abs_diff(back.depth.grid, d.depth.grid), 1e-7);
    EXPECT_DOUBLE_EQ(back.lens.aperture, d.lens.aperture);
    EXPECT_EQ(list_captures(dir.path()).size(), 1u);
    EXPECT_THROW(read_capture(dir.path() / "nope"), FormatError);
}

TEST(Dataset, ZeroShiftIsIdentity) {
    const TrainingExample ex = make_example(testutil::small_capture(4, 16));
    const TrainingExample same = translate_example(ex, 0, 0);
    EXPECT_EQ(same.data.center, ex.data.center);
    EXPECT_EQ(same.data.depth.grid, ex.data.depth.grid);
    EXPECT_EQ(same.valid, ex.valid);
}

TEST(Dataset, ShiftMovesEverythingConsistently) {
    const TrainingExample ex = make_example(testutil::small_capture(5, 16));
    const int dx = 3;
    const int dy = -2;
    const TrainingExample s = translate_example(ex, dx, dy);
    const auto &a = ex.data;
    const auto &b = s.data;
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const int sy = y - dy;
            const int sx = x - dx;
            const std::size_t i = static_cast<std::size_t>(y * 16 + x);
            if (sy < 0 || sy >= 16 || sx < 0 || sx >= 16) {
                EXPECT_EQ(s.valid[i], 0);
                EXPECT_EQ(b.confidence.values()[i], 0.0);
                continue;
            }
            EXPECT_EQ(s.valid[i], 1);
            EXPECT_EQ(b.depth.grid(y, x), a.depth.grid(sy, sx));
            EXPECT_EQ(b.center(1, y, x), a.center(1, sy, sx));
            EXPECT_EQ(b.dp_right(y, x), a.dp_right(sy, sx));
            EXPECT_EQ(b.neighbors[2](0, y, x), a.neighbors[2](0, sy, sx));
            EXPECT_EQ(b.confidence(y, x), a.confidence(sy, sx));
        }
    }
    EXPECT_DOUBLE_EQ(b.rig[0].cx(), a.rig[0].cx() + dx);
    EXPECT_DOUBLE_EQ(b.rig[3].cy(), a.rig[3].cy() + dy);
    EXPECT_THROW(translate_example(ex, 16, 0), DomainError);
}

TEST(Dataset, ShiftDistributionIsUniform) {
    std::mt19937_64 rng(6);
    std::vector<int> counts(21, 0);
    int max_abs = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const Shift s = sample_shift(10, rng);
        max_abs = std::max({max_abs, std::abs(s.dx), std::abs(s.dy)});
        ++counts[static_cast<std::size_t>(s.dx + 10)];
    }
    EXPECT_EQ(max_abs, 10);
    const double expected = draws / 21.0;
    double chi2 = 0.0;
    for (int c : counts) {
        chi2 += (c - expected) * (c - expected) / expected;
    }
    EXPECT_LT(chi2, 45.3); // 99.9% quantile with 20 degrees of freedom
}

TEST(Dataset, RgbInputZeroesDualPixelChannels) {
    const CaptureData d = testutil::small_capture(7, 16);
    const FeatureMap rgb = network_input(d, InputKind::rgb);
    const FeatureMap dp = network_input(d, InputKind::rgbdp);
    EXPECT_EQ(rgb.channels, 5u);
    for (std::size_t y = 0; y < 16; ++y) {
        for (std::size_t x = 0; x < 16; ++x) {
            EXPECT_EQ(rgb.at(3, y, x), 0.0);
            EXPECT_EQ(rgb.at(4, y, x), 0.0);
            EXPECT_EQ(dp.at(3, y, x), d.dp_left(y, x));
            EXPECT_EQ(rgb.at(0, y, x), dp.at(0, y, x));
        }
    }
}

TEST(Dataset, AmbiguityDemoReproducesDualPixelPair) {
    const AmbiguityDemo demo = ambiguity_demo(3, 32);
    EXPECT_NE(demo.lens1.focus_distance, demo.lens2.focus_distance);
    EXPECT_LT(demo.max_dp_difference, 1e-6);
    EXPECT_GT(demo.max_abs_disparity, 0.1);
    for (std::size_t i = 0; i < demo.depths1.size(); ++i) {
        EXPECT_NEAR(dp_disparity(demo.depths2[i], demo.lens2),
                    dp_disparity(demo.depths1[i], demo.lens1), 1e-9);
    }
}

// ---- trainer ----

TEST(Trainer, ModeParsing) {
    TrainConfig c;
    parse_train_mode("none", c);
    EXPECT_EQ(c.invariance, Invariance::none);
    parse_train_mode("scale", c);
    EXPECT_EQ(c.invariance, Invariance::scale);
    parse_train_mode("affine-folded", c);
    EXPECT_EQ(c.strategy, AffineStrategy::folded);
    EXPECT_EQ(train_mode_name(c), "affine-folded");
    parse_train_mode("affine-assisted", c);
    EXPECT_EQ(train_mode_name(c), "affine-assisted");
    EXPECT_THROW(parse_train_mode("affine", c), ConfigError);
}

TEST(Trainer, ReducedGroundTruth) {
    const CaptureData d = testutil::small_capture(8, 16);
    const auto [depth, conf] = reduce_ground_truth(d, 2);
    ASSERT_EQ(depth.height(), 8u);
    EXPECT_DOUBLE_EQ(depth(1, 2), 0.25 * (d.depth.grid(2, 4) + d.depth.grid(2, 5) +
                                          d.depth.grid(3, 4) + d.depth.grid(3, 5)));
    EXPECT_DOUBLE_EQ(conf(1, 2), std::min({d.confidence(2, 4), d.confidence(2, 5),
                                           d.confidence(3, 4), d.confidence(3, 5)}));
}

TEST(Trainer, ConstantPredictionEvaluates) {
    const CaptureData d = testutil::small_capture(9, 16);
    const EvalSummary s = evaluate_prediction(Grid(8, 8, 0.5), d);
    EXPECT_TRUE(std::isfinite(s.aiwe1));
    EXPECT_EQ(s.one_minus_rho, 1.0);
}

TEST(Trainer, RejectsTooFewCaptures) {
    TrainConfig c;
    c.steps = 1;
    EXPECT_THROW(train(c, tiny_dataset(1)), ConfigError);
    TempDir empty("empty");
    EXPECT_THROW(train(c, empty.path()), ConfigError);
}

TEST(Trainer, EveryModeRunsAndLogs) {
    const auto data = tiny_dataset(6);
    for (const char *mode : {"none", "scale", "affine-assisted", "affine-folded"}) {
        TrainConfig c;
        parse_train_mode(mode, c);
        c.steps = 12;
        c.eval_every = 6;
        c.max_shift = 3;
        c.seed = 4;
        const TrainResult r = train(c, data);
        ASSERT_EQ(r.log.size(), 2u) << mode;
        EXPECT_EQ(r.log[1].step, 12u);
        EXPECT_TRUE(std::isfinite(r.log[1].loss)) << mode;
        EXPECT_TRUE(std::isfinite(r.final_eval.aiwe1)) << mode;
        if (std::string(mode) == "affine-folded") {
            EXPECT_EQ(r.latents.size(), 5u);
            for (const auto &l : r.latents) {
                EXPECT_GE(l.scale(), FoldedLatents::kEpsilon);
            }
        } else {
            EXPECT_TRUE(r.latents.empty());
        }
    }
}

TEST(Trainer, SeededRunsAreBitIdentical) {
    const auto data = tiny_dataset(4);
    TempDir a("train_a");
    TempDir b("train_b");
    TrainConfig c;
    c.steps = 10;
    c.eval_every = 5;
    c.seed = 17;
    c.max_shift = 2;
    c.out_dir = a.path();
    train(c, data);
    c.out_dir = b.path();
    train(c, data);
    EXPECT_EQ(slurp(a.path() / "model.bin"), slurp(b.path() / "model.bin"));
    EXPECT_EQ(slurp(a.path() / "log.csv"), slurp(b.path() / "log.csv"));
    const std::string log = slurp(a.path() / "log.csv");
    EXPECT_EQ(log.rfind("step,loss,aiwe1,aiwe2,one_minus_rho\n", 0), 0u);

    MicroNet net;
    load_parameters(net, read_checkpoint(a.path() / "model"));
    EXPECT_TRUE(predict(net, data[3], InputKind::rgbdp).all_finite());
}

TEST(Trainer, DivergenceAbortsWithLastGoodCheckpoint) {
    const auto data = tiny_dataset(3);
    TempDir out("diverge");
    TrainConfig c;
    parse_train_mode("affine-folded", c);
    c.steps = 50;
    c.eval_every = 50;
    c.adam.learning_rate = 1e300;
    c.out_dir = out.path();
    EXPECT_THROW(train(c, data), TrainingDiverged);
    EXPECT_TRUE(std::filesystem::exists(out.path() / "last_good.bin"));
    EXPECT_TRUE(std::filesystem::exists(out.path() / "last_good.json"));
}

TEST(Trainer, EndToEndGradientCheck) {
    for (const auto &r : run_gradchecks(3, 3, {"training_loss"})) {
        EXPECT_TRUE(r.passed) << "seed " << r.seed << " max error " << r.max_error;
    }
}

TEST(Trainer, CsvFormatting) {
    LogRow row;
    row.step = 100;
    row.loss = 0.125;
    row.eval = {0.5, 0.25, 1.0 / 3.0};
    EXPECT_EQ(log_to_csv({row}),
              "step,loss,aiwe1,aiwe2,one_minus_rho\n100,0.125,0.5,0.25,0.3333333333\n");
}

} // namespace
