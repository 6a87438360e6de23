// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

// dualpix command-line driver: simulate, sweep, train, eval, gradcheck,
// ambiguity-demo. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "dualpix/dataset.hpp"
#include "dualpix/gradcheck.hpp"
#include "dualpix/metrics.hpp"
#include "dualpix/mvs.hpp"
#include "dualpix/parallel.hpp"
#include "dualpix/raster_io.hpp"
#include "dualpix/render.hpp"
#include "dualpix/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <typeinfo>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dualpix;

namespace {

void write_json(const fs::path &path, const json &j) {
    if (!path.parent_path().empty()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
}

const char *error_kind(const std::exception &e) {
    if (dynamic_cast<const DomainError *>(&e)) return "domain_error";
    if (dynamic_cast<const FormatError *>(&e)) return "format_error";
    if (dynamic_cast<const DimensionError *>(&e)) return "dimension_error";
    if (dynamic_cast<const ConfigError *>(&e)) return "config_error";
    if (dynamic_cast<const SingularFitError *>(&e)) return "singular_fit";
    if (dynamic_cast<const TrainingDiverged *>(&e)) return "training_diverged";
    if (dynamic_cast<const Error *>(&e)) return "error";
    return "internal_error";
}

struct SimulateArgs {
    std::string scene;
    std::string out;
    bool random = false;
    std::size_t count = 1;
    std::size_t size = 64;
    std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs &a) {
    json summary = json::array();
    if (!a.scene.empty()) {
        const SceneSpec spec = load_scene_json(a.scene);
        const Capture cap = render_capture(spec.scene, spec.rig, spec.lens);
        write_capture(a.out, to_capture_data(cap, spec));
        summary.push_back({{"capture", a.out}, {"layers", spec.scene.layers.size()}});
    } else {
        if (a.size % 4 != 0) {
            throw ConfigError("--size must be divisible by 4");
        }
        std::mt19937_64 rng(a.seed);
        RandomSceneConfig cfg;
        cfg.size = a.size;
        cfg.focal_px = static_cast<double>(a.size);
        for (std::size_t i = 0; i < a.count; ++i) {
            const SceneSpec spec = random_scene(cfg, rng);
            const Capture cap = render_capture(spec.scene, spec.rig, spec.lens);
            char name[32];
            std::snprintf(name, sizeof(name), "capture_%04zu", i);
            write_capture(fs::path(a.out) / name, to_capture_data(cap, spec));
            summary.push_back({{"capture", name},
                               {"layers", spec.scene.layers.size()},
                               {"focus_distance", spec.lens.focus_distance}});
        }
    }
    std::cout << json{{"captures", summary}}.dump(2) << '\n';
    return 0;
}

int run_sweep(const std::string &capture_dir, std::size_t planes, std::size_t downscale,
              const std::string &out) {
    const CaptureData d = read_capture(capture_dir);
    std::array<Image, 5> views{d.center, d.neighbors[0], d.neighbors[1], d.neighbors[2],
                               d.neighbors[3]};
    GroundTruthConfig cfg;
    cfg.planes = planes;
    cfg.downscale = downscale;
    const GroundTruth gt = ground_truth_pipeline(views, d.rig, d.depth.range, cfg);
    fs::create_directories(out);
    write_pfm(fs::path(out) / "depth.pfm", gt.depth.grid);
    write_pfm(fs::path(out) / "confidence.pfm", gt.confidence);
    const json report = json::parse(gt.report.to_json());
    write_json(fs::path(out) / "report.json", report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

int run_train(const std::string &data, const std::string &mode, const std::string &input,
              std::size_t steps, std::uint64_t seed, std::size_t eval_every, const std::string &out) {
    TrainConfig cfg;
    parse_train_mode(mode, cfg);
    cfg.input = input == "rgb" ? InputKind::rgb : InputKind::rgbdp;
    cfg.steps = steps;
    cfg.seed = seed;
    cfg.eval_every = eval_every;
    cfg.out_dir = out;
    const TrainResult r = train(cfg, fs::path(data));
    const json summary{{"mode", train_mode_name(cfg)},
                       {"input", input},
                       {"steps", steps},
                       {"seed", seed},
                       {"aiwe1", r.final_eval.aiwe1},
                       {"aiwe2", r.final_eval.aiwe2},
                       {"one_minus_rho", r.final_eval.one_minus_rho},
                       {"checkpoint", (fs::path(out) / "model.bin").string()},
                       {"log", (fs::path(out) / "log.csv").string()}};
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int run_eval(const std::string &pred_path, const std::string &gt_path, const std::string &conf_path,
             double crop_fraction, const std::string &out) {
    const Grid pred = read_pfm(pred_path);
    const Grid gt = read_pfm(gt_path);
    const Grid conf = read_pfm(conf_path);
    const MetricsRecord r = center_crop_eval(pred, gt, conf, crop_fraction);
    const std::string text = r.to_json();
    if (!out.empty()) {
        write_json(out, json::parse(text));
    }
    std::cout << text << '\n';
    return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t count, const std::vector<std::string> &only) {
    for (const std::string &name : only) {
        bool known = false;
        for (const GradCheck &c : registered_gradchecks()) {
            known = known || c.name == name;
        }
        if (!known) {
            throw ConfigError("unknown gradient check '" + name + "'");
        }
    }
    const auto reports = run_gradchecks(seed, count, only);
    bool all = true;
    json rows = json::array();
    for (const GradCheckReport &r : reports) {
        all = all && r.passed;
        std::printf("%-18s seed %-4llu %s  max_rel_err %.3e  within %zu/%zu (tol %.0e, need %.0f%%)\n",
                    r.name.c_str(), static_cast<unsigned long long>(r.seed),
                    r.passed ? "PASS" : "FAIL", r.max_error, r.within, r.checked, r.tolerance,
                    100.0 * r.min_fraction);
        rows.push_back({{"name", r.name},
                        {"seed", r.seed},
                        {"passed", r.passed},
                        {"max_rel_error", r.max_error},
                        {"within", r.within},
                        {"checked", r.checked}});
    }
    std::printf("%s: %zu checks\n", all ? "ALL PASS" : "FAILURES", reports.size());
    return all ? 0 : 1;
}

int run_ambiguity(std::uint64_t seed, std::size_t size, double g1, double g2) {
    const AmbiguityDemo demo = ambiguity_demo(seed, size, g1, g2);
    const bool ok = demo.max_dp_difference < 1e-6;
    const json report{{"focus_distance_1", demo.lens1.focus_distance},
                      {"focus_distance_2", demo.lens2.focus_distance},
                      {"layer_depths_1", demo.depths1},
                      {"layer_depths_2", demo.depths2},
                      {"max_abs_disparity_px", demo.max_abs_disparity},
                      {"max_dp_pair_difference", demo.max_dp_difference},
                      {"identical", ok}};
    std::cout << report.dump(2) << '\n';
    if (!ok) {
        std::cerr << json{{"error", "ambiguity_mismatch"},
                          {"message", "dual-pixel pairs differ beyond 1e-6"}}
                         .dump()
                  << '\n';
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"dualpix: dual-pixel depth simulation, supervision and evaluation"};
    app.require_subcommand(1);
    app.fallthrough(); // global options are also accepted after the subcommand
    std::size_t threads = 0;
    app.add_option("--threads", threads, "worker threads (overrides DUALPIX_THREADS)")
        ->check(CLI::PositiveNumber);

    SimulateArgs sim;
    auto *simulate = app.add_subcommand("simulate", "render captures from a scene JSON or random scenes");
    auto *scene_opt = simulate->add_option("--scene", sim.scene, "scene description JSON")
                          ->check(CLI::ExistingFile);
    auto *random_flag = simulate->add_flag("--random", sim.random, "generate random desk scenes");
    scene_opt->excludes(random_flag);
    simulate->add_option("--count", sim.count, "number of random captures")->check(CLI::PositiveNumber);
    simulate->add_option("--size", sim.size, "random capture size in pixels")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "random seed");
    simulate->add_option("--out", sim.out, "output directory")->required();

    std::string capture, sweep_out;
    std::size_t planes = 64;
    std::size_t downscale = 1;
    auto *sweep = app.add_subcommand("sweep", "plane-sweep ground truth for a capture");
    sweep->add_option("--capture", capture, "capture directory")->required();
    sweep->add_option("--planes", planes, "number of depth planes")->check(CLI::Range(2, 4096));
    sweep->add_option("--downscale", downscale, "per-dimension downscale (power of two)");
    sweep->add_option("--out", sweep_out, "output directory")->required();

    std::string data, mode = "affine-assisted", input = "rgbdp", train_out;
    std::size_t steps = 2000;
    std::size_t eval_every = 100;
    std::uint64_t train_seed = 0;
    auto *trainc = app.add_subcommand("train", "train the depth network on simulated captures");
    trainc->add_option("--data", data, "dataset directory from simulate")->required();
    trainc->add_option("--mode", mode, "none | scale | affine-assisted | affine-folded")
        ->check(CLI::IsMember({"none", "scale", "affine-assisted", "affine-folded"}));
    trainc->add_option("--input", input, "rgb | rgbdp")->check(CLI::IsMember({"rgb", "rgbdp"}));
    trainc->add_option("--steps", steps, "optimizer steps");
    trainc->add_option("--seed", train_seed, "random seed");
    trainc->add_option("--eval-every", eval_every, "held-out evaluation period")
        ->check(CLI::PositiveNumber);
    trainc->add_option("--out", train_out, "output directory")->required();

    std::string pred, gt, conf, eval_out;
    double crop = 1.0;
    auto *evalc = app.add_subcommand("eval", "affine-invariant metrics for a prediction");
    evalc->add_option("--pred", pred, "prediction PFM")->required()->check(CLI::ExistingFile);
    evalc->add_option("--gt", gt, "ground-truth PFM")->required()->check(CLI::ExistingFile);
    evalc->add_option("--conf", conf, "confidence PFM")->required()->check(CLI::ExistingFile);
    evalc->add_option("--crop", crop, "centre-crop fraction (default: whole image)")
        ->check(CLI::Range(0.0, 1.0));
    evalc->add_option("--out", eval_out, "write the JSON record here as well");

    std::uint64_t gc_seed = 0;
    std::size_t gc_count = 1;
    std::vector<std::string> gc_only;
    auto *gradc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradc->add_option("--seed", gc_seed, "first seed");
    gradc->add_option("--count", gc_count, "number of seeds per check")->check(CLI::PositiveNumber);
    gradc->add_option("--only", gc_only, "restrict to named checks");

    std::uint64_t amb_seed = 0;
    std::size_t amb_size = 64;
    double g1 = 1.0;
    double g2 = 0.8;
    auto *amb = app.add_subcommand("ambiguity-demo",
                                   "render one scene under two focus settings with equivalent depths");
    amb->add_option("--seed", amb_seed, "random seed");
    amb->add_option("--size", amb_size, "image size")->check(CLI::PositiveNumber);
    amb->add_option("--g1", g1, "first focus distance (m)");
    amb->add_option("--g2", g2, "second focus distance (m)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        if (e.get_exit_code() != 0) {
            std::cerr << app.help() << '\n';
        }
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (*simulate && sim.scene.empty() && !sim.random) {
        std::cerr << "simulate: pass either --scene FILE or --random\n" << simulate->help() << '\n';
        return 2;
    }

    try {
        if (threads > 0) {
            set_thread_count(threads);
        }
        if (*simulate) return run_simulate(sim);
        if (*sweep) return run_sweep(capture, planes, downscale, sweep_out);
        if (*trainc) return run_train(data, mode, input, steps, train_seed, eval_every, train_out);
        if (*evalc) return run_eval(pred, gt, conf, crop, eval_out);
        if (*gradc) return run_gradcheck(gc_seed, gc_count, gc_only);
        if (*amb) return run_ambiguity(amb_seed, amb_size, g1, g2);
    } catch (const std::exception &e) {
        std::cerr << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 2;
}
