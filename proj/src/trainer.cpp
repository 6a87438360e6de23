// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/trainer.hpp"

#include "dualpix/checkpoint.hpp"
#include "dualpix/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace dualpix {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kLossLevels = 3; // pyramid levels scored per head

Grid min_pool2(const Grid &g) {
    Grid out(g.height() / 2, g.width() / 2);
    for (std::size_t y = 0; y < out.height(); ++y) {
        for (std::size_t x = 0; x < out.width(); ++x) {
            out(y, x) = std::min({g(2 * y, 2 * x), g(2 * y, 2 * x + 1), g(2 * y + 1, 2 * x),
                                  g(2 * y + 1, 2 * x + 1)});
        }
    }
    return out;
}

bool all_finite(const Grid &g) { return g.all_finite(); }

bool all_finite(const std::vector<Tensor> &ts) {
    for (const Tensor &t : ts) {
        for (double v : t.data) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

// Best constant fit (a = 0): weighted median for L1, weighted mean for L2.
EvalSummary constant_fit_summary(const Grid &target, const Grid &confidence) {
    std::vector<std::pair<double, double>> items;
    double w = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (confidence[i] > 0.0) {
            items.emplace_back(target[i], confidence[i]);
            w += confidence[i];
            mean += confidence[i] * target[i];
        }
    }
    mean /= w;
    std::sort(items.begin(), items.end());
    double acc = 0.0;
    double median = items.back().first;
    for (const auto &[v, c] : items) {
        acc += c;
        if (acc >= 0.5 * w) {
            median = v;
            break;
        }
    }
    EvalSummary s;
    double var = 0.0;
    for (const auto &[v, c] : items) {
        s.aiwe1 += c * std::abs(v - median);
        var += c * (v - mean) * (v - mean);
    }
    s.aiwe1 /= w;
    s.aiwe2 = std::sqrt(var / w);
    s.one_minus_rho = 1.0;
    return s;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string metadata(const TrainConfig &cfg, std::size_t step) {
    return nlohmann::json{{"mode", train_mode_name(cfg)},
                          {"input", cfg.input == InputKind::rgb ? "rgb" : "rgbdp"},
                          {"steps", cfg.steps},
                          {"step", step},
                          {"seed", cfg.seed},
                          {"parameters", MicroNet().parameter_count()}}
        .dump();
}

std::vector<NamedTensor> checkpoint_tensors(const MicroNet &net, const Tensor *latents) {
    auto t = named_parameters(net);
    if (latents) {
        t.push_back({"latents", *latents});
    }
    return t;
}

} // namespace

void parse_train_mode(const std::string &mode, TrainConfig &config) {
    if (mode == "none") {
        config.invariance = Invariance::none;
        config.strategy = AffineStrategy::assisted;
    } else if (mode == "scale") {
        config.invariance = Invariance::scale;
        config.strategy = AffineStrategy::assisted;
    } else if (mode == "affine-assisted") {
        config.invariance = Invariance::affine;
        config.strategy = AffineStrategy::assisted;
    } else if (mode == "affine-folded") {
        config.invariance = Invariance::affine;
        config.strategy = AffineStrategy::folded;
    } else {
        throw ConfigError("unknown training mode '" + mode +
                          "' (expected none, scale, affine-assisted or affine-folded)");
    }
}

std::string train_mode_name(const TrainConfig &config) {
    switch (config.invariance) {
    case Invariance::none:
        return "none";
    case Invariance::scale:
        return config.strategy == AffineStrategy::folded ? "scale-folded" : "scale";
    case Invariance::affine:
        break;
    }
    return config.strategy == AffineStrategy::folded ? "affine-folded" : "affine-assisted";
}

std::pair<Grid, Grid> reduce_ground_truth(const CaptureData &capture, std::size_t factor) {
    Grid depth = capture.depth.grid;
    Grid conf = capture.confidence;
    for (std::size_t f = factor; f > 1; f /= 2) {
        if (f % 2 != 0) {
            throw ConfigError("reduction factor must be a power of two");
        }
        depth = downsample2(depth);
        conf = min_pool2(conf);
    }
    return {std::move(depth), std::move(conf)};
}

Grid predict(const MicroNet &net, const CaptureData &capture, InputKind input) {
    return net.forward(network_input(capture, input)).outputs[0];
}

EvalSummary evaluate_prediction(const Grid &prediction, const CaptureData &capture) {
    const std::size_t factor = capture.depth.grid.width() / prediction.width();
    const auto [target, conf] = reduce_ground_truth(capture, factor);
    try {
        EvalSummary s;
        s.aiwe1 = aiwe(prediction, target, conf, 1);
        s.aiwe2 = aiwe(prediction, target, conf, 2);
        try {
            s.one_minus_rho = weighted_spearman(prediction, target, conf);
        } catch (const DomainError &) {
            s.one_minus_rho = 1.0;
        }
        return s;
    } catch (const SingularFitError &) {
        return constant_fit_summary(target, conf);
    }
}

std::string log_to_csv(const std::vector<LogRow> &log) {
    std::string out = "step,loss,aiwe1,aiwe2,one_minus_rho\n";
    for (const LogRow &r : log) {
        out += std::to_string(r.step) + "," + format_double(r.loss) + "," +
               format_double(r.eval.aiwe1) + "," + format_double(r.eval.aiwe2) + "," +
               format_double(r.eval.one_minus_rho) + "\n";
    }
    return out;
}

TrainResult train(const TrainConfig &cfg, const std::vector<CaptureData> &captures) {
    if (captures.size() < 2) {
        throw ConfigError("training needs at least two captures (one is held out)");
    }
    if (cfg.eval_every == 0) {
        throw ConfigError("eval_every must be positive");
    }
    const std::size_t n = captures.size();
    const std::size_t n_held = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(cfg.held_out_fraction * static_cast<double>(n))), 1,
        n - 1);
    const std::size_t n_train = n - n_held;

    std::mt19937_64 rng(cfg.seed);
    TrainResult result;
    MicroNet &net = result.net;
    net.initialize(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);

    const bool folded = cfg.invariance != Invariance::none && cfg.strategy == AffineStrategy::folded;
    Tensor latents({n_train, 2});
    if (folded) {
        std::uniform_real_distribution<double> init(-1.0, 1.0);
        for (double &v : latents.data) {
            v = init(rng);
        }
        if (cfg.invariance == Invariance::scale) {
            for (std::size_t i = 0; i < n_train; ++i) {
                latents.data[2 * i + 1] = 0.0;
            }
        }
    }

    std::vector<Tensor *> params = net.parameters();
    std::vector<const Tensor *> const_params(params.begin(), params.end());
    if (folded) {
        params.push_back(&latents);
        const_params.push_back(&latents);
    }
    AdamState adam(const_params, cfg.adam);

    std::vector<TrainingExample> train_set;
    for (std::size_t i = 0; i < n_train; ++i) {
        train_set.push_back(make_example(captures[i]));
    }

    auto evaluate_held_out = [&]() {
        EvalSummary mean;
        for (std::size_t i = n_train; i < n; ++i) {
            const EvalSummary s = evaluate_prediction(predict(net, captures[i], cfg.input), captures[i]);
            mean.aiwe1 += s.aiwe1;
            mean.aiwe2 += s.aiwe2;
            mean.one_minus_rho += s.one_minus_rho;
        }
        const auto k = static_cast<double>(n_held);
        mean.aiwe1 /= k;
        mean.aiwe2 /= k;
        mean.one_minus_rho /= k;
        return mean;
    };

    std::uniform_int_distribution<std::size_t> pick(0, n_train - 1);
    double running = 0.0;
    std::size_t running_count = 0;
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const std::size_t idx = pick(rng);
        Shift shift;
        const TrainingExample ex = augment_translate(train_set[idx], cfg.max_shift, rng, &shift);
        const CaptureData &d = ex.data;
        const auto cache = net.forward(network_input(d, cfg.input));

        ViewSupervision vs(d.center, d.neighbors, d.rig, d.depth.range, kLossLevels);
        for (std::size_t j = 0; j < 4; ++j) {
            vs.set_neighbor_mask(j, ex.valid);
        }

        double loss = 0.0;
        std::array<Grid, MicroNet::kScales> upstream;
        Tensor latent_grad({n_train, 2});
        for (std::size_t s = 0; s < MicroNet::kScales; ++s) {
            const Grid &pred = cache.outputs[s];
            LossResult r;
            try {
            if (cfg.invariance == Invariance::none) {
                r = vs.evaluate(pred, true);
            } else if (folded) {
                FoldedLatents lat;
                lat.a_hat = latents.data[2 * idx];
                lat.b = latents.data[2 * idx + 1];
                const FoldedLoss f = folded_loss(pred, lat, vs);
                r = f.loss;
                latent_grad.data[2 * idx] += f.grad_a_hat;
                if (cfg.invariance == Invariance::affine) {
                    latent_grad.data[2 * idx + 1] += f.grad_b;
                }
            } else {
                const auto [target, conf] = reduce_ground_truth(d, std::size_t{2} << s);
                try {
                    r = assisted_loss(pred, target, conf, vs, cfg.invariance).loss;
                } catch (const SingularFitError &) {
                    // No usable ground truth after augmentation: plain view supervision.
                    r = vs.evaluate(pred, true);
                }
            }
            } catch (const ZeroCoverageError &) {
                // Every warp left the neighbours (folded latents can push all
                // depths behind the camera): this head contributes nothing.
                r.value = 0.0;
                r.gradient = Grid(pred.height(), pred.width());
                ++result.zero_coverage_steps;
            }
            loss += r.value;
            upstream[s] = std::move(r.gradient);
        }

        std::optional<MicroNet::Gradients> grads;
        bool finite = std::isfinite(loss) && all_finite(upstream[0]) && all_finite(upstream[1]);
        if (finite) {
            grads = net.backward(cache, upstream);
            finite = all_finite(grads->params) && all_finite({latent_grad});
        }
        if (!finite) {
            if (cfg.out_dir) {
                write_checkpoint(*cfg.out_dir / "last_good",
                                 checkpoint_tensors(net, folded ? &latents : nullptr),
                                 metadata(cfg, step - 1));
            }
            throw TrainingDiverged("non-finite loss or gradient at step " + std::to_string(step) +
                                   " (example " + std::to_string(idx) + ", shift " +
                                   std::to_string(shift.dx) + "," + std::to_string(shift.dy) +
                                   ", loss " + format_double(loss) + ")");
        }

        std::vector<const Tensor *> grad_ptrs;
        for (const Tensor &t : grads->params) {
            grad_ptrs.push_back(&t);
        }
        if (folded) {
            grad_ptrs.push_back(&latent_grad);
        }
        adam_step(adam, params, grad_ptrs);
        net.mark_updated();

        running += loss;
        ++running_count;
        if (step % cfg.eval_every == 0 || step == cfg.steps) {
            LogRow row;
            row.step = step;
            row.loss = running / static_cast<double>(running_count);
            row.eval = evaluate_held_out();
            result.log.push_back(row);
            running = 0.0;
            running_count = 0;
        }
    }
    result.final_eval = result.log.empty() ? evaluate_held_out() : result.log.back().eval;
    if (folded) {
        for (std::size_t i = 0; i < n_train; ++i) {
            FoldedLatents lat;
            lat.a_hat = latents.data[2 * i];
            lat.b = latents.data[2 * i + 1];
            result.latents.push_back(lat);
        }
    }

    if (cfg.out_dir) {
        fs::create_directories(*cfg.out_dir);
        write_checkpoint(*cfg.out_dir / "model", checkpoint_tensors(net, folded ? &latents : nullptr),
                         metadata(cfg, cfg.steps));
        std::ofstream log(*cfg.out_dir / "log.csv");
        log << log_to_csv(result.log);
        if (!log) {
            throw FormatError("failed writing training log");
        }
    }
    return result;
}

TrainResult train(const TrainConfig &config, const fs::path &data_dir) {
    std::vector<CaptureData> captures;
    for (const fs::path &p : list_captures(data_dir)) {
        captures.push_back(read_capture(p));
    }
    if (captures.empty()) {
        throw ConfigError("no captures found in " + data_dir.string());
    }
    return train(config, captures);
}

} // namespace dualpix
