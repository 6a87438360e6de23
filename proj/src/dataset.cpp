// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/dataset.hpp"

#include "dualpix/raster_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dualpix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out << text << '\n';
}

json lens_to_json(const ThinLensParams &lens) {
    return {{"aperture", lens.aperture},
            {"focal_length", lens.focal_length},
            {"focus_distance", lens.focus_distance},
            {"disparity_gain", lens.disparity_gain}};
}

ThinLensParams lens_from_json(const json &j) {
    try {
        return ThinLensParams(j.at("aperture").get<double>(), j.at("focal_length").get<double>(),
                              j.at("focus_distance").get<double>(),
                              j.at("disparity_gain").get<double>());
    } catch (const json::exception &e) {
        throw ConfigError(std::string("lens: ") + e.what());
    }
}

// Smooth multi-octave value noise in [0, 1].
Grid value_noise(std::size_t h, std::size_t w, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Grid out(h, w);
    double amplitude = 1.0;
    double total = 0.0;
    for (std::size_t cell : {16u, 8u, 4u, 2u}) {
        const std::size_t gh = h / cell + 2;
        const std::size_t gw = w / cell + 2;
        Grid lattice(gh, gw);
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            lattice[i] = unit(rng);
        }
        for (std::size_t y = 0; y < h; ++y) {
            const double fy = static_cast<double>(y) / static_cast<double>(cell);
            const auto y0 = static_cast<std::size_t>(fy);
            const double ty = fy - static_cast<double>(y0);
            for (std::size_t x = 0; x < w; ++x) {
                const double fx = static_cast<double>(x) / static_cast<double>(cell);
                const auto x0 = static_cast<std::size_t>(fx);
                const double tx = fx - static_cast<double>(x0);
                const double top = (1 - tx) * lattice(y0, x0) + tx * lattice(y0, x0 + 1);
                const double bot = (1 - tx) * lattice(y0 + 1, x0) + tx * lattice(y0 + 1, x0 + 1);
                out(y, x) += amplitude * ((1 - ty) * top + ty * bot);
            }
        }
        total += amplitude;
        amplitude *= 0.8;
    }
    for (double &v : out.values()) {
        v /= total;
    }
    // Stretch contrast around the mean; value noise averages towards 0.5.
    for (double &v : out.values()) {
        v = std::clamp(0.5 + 2.0 * (v - 0.5), 0.0, 1.0);
    }
    return out;
}

} // namespace

Image random_texture(std::size_t h, std::size_t w, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Grid lum = value_noise(h, w, rng);
    const Grid tint = value_noise(h, w, rng);
    std::array<double, 3> base{};
    std::array<double, 3> alt{};
    for (std::size_t c = 0; c < 3; ++c) {
        base[c] = 0.2 + 0.6 * unit(rng);
        alt[c] = 0.2 + 0.6 * unit(rng);
    }
    Image tex(h, w, 3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double t = tint(y, x);
            for (std::size_t c = 0; c < 3; ++c) {
                const double colour = (1 - t) * base[c] + t * alt[c];
                tex(c, y, x) = std::clamp(colour * (0.3 + 1.4 * lum(y, x)), 0.0, 1.0);
            }
        }
    }
    return tex;
}

namespace {

Grid random_mask(std::size_t tex, std::size_t image, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double offset = 0.5 * static_cast<double>(tex - image);
    const double s = static_cast<double>(image);
    const double cx = offset + s * (0.2 + 0.6 * unit(rng));
    const double cy = offset + s * (0.2 + 0.6 * unit(rng));
    const double rx = s * (0.10 + 0.18 * unit(rng));
    const double ry = s * (0.10 + 0.18 * unit(rng));
    const bool ellipse = unit(rng) < 0.5;
    Grid mask(tex, tex);
    for (std::size_t y = 0; y < tex; ++y) {
        for (std::size_t x = 0; x < tex; ++x) {
            const double u = (static_cast<double>(x) - cx) / rx;
            const double v = (static_cast<double>(y) - cy) / ry;
            const bool inside = ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1 && std::abs(v) <= 1;
            mask(y, x) = inside ? 1.0 : 0.0;
        }
    }
    return mask;
}

Grid shift_grid(const Grid &g, int dx, int dy) {
    Grid out(g.height(), g.width());
    const long h = static_cast<long>(g.height());
    const long w = static_cast<long>(g.width());
    for (long y = 0; y < h; ++y) {
        const auto sy = static_cast<std::size_t>(std::clamp(y - dy, 0L, h - 1));
        for (long x = 0; x < w; ++x) {
            const auto sx = static_cast<std::size_t>(std::clamp(x - dx, 0L, w - 1));
            out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = g(sy, sx);
        }
    }
    return out;
}

Image shift_image(const Image &img, int dx, int dy) {
    std::vector<Grid> planes;
    for (std::size_t c = 0; c < img.channels(); ++c) {
        planes.push_back(shift_grid(img.channel(c), dx, dy));
    }
    return Image(std::move(planes));
}

} // namespace

SceneSpec load_scene_json(const fs::path &path) {
    const json j = read_json(path);
    const fs::path base = path.parent_path();
    SceneSpec spec;
    try {
        spec.scene.height = j.at("height").get<std::size_t>();
        spec.scene.width = j.at("width").get<std::size_t>();
        if (j.contains("range")) {
            spec.scene.range =
                DepthRange(j["range"].at("near").get<double>(), j["range"].at("far").get<double>());
        }
        spec.lens = lens_from_json(j.at("lens"));
        const json &rig = j.at("rig");
        spec.rig = make_plus_rig(spec.scene.width, spec.scene.height,
                                 rig.at("focal_px").get<double>(), rig.at("baseline_m").get<double>());
        for (const json &l : j.at("layers")) {
            SceneLayer layer;
            layer.texture = read_png(base / l.at("texture").get<std::string>());
            layer.depth_m = l.at("depth_m").get<double>();
            if (l.contains("mask") && !l["mask"].is_null()) {
                const Image m = read_png(base / l["mask"].get<std::string>());
                layer.mask = m.channel(0);
            }
            spec.scene.layers.push_back(std::move(layer));
        }
    } catch (const json::exception &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    spec.scene.validate();
    return spec;
}

SceneSpec random_scene(const RandomSceneConfig &cfg, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    SceneSpec spec;
    spec.scene.height = cfg.size;
    spec.scene.width = cfg.size;
    spec.rig = make_plus_rig(cfg.size, cfg.size, cfg.focal_px, cfg.baseline_m);

    // Margin covers the largest neighbour parallax so every view sees texture.
    const auto margin = static_cast<std::size_t>(
        std::ceil(cfg.focal_px * cfg.baseline_m / cfg.foreground_min_m)) + 4;
    const std::size_t tex = cfg.size + 2 * margin;

    const double background = between(cfg.background_min_m, cfg.background_max_m);
    const int n_fg = cfg.min_foreground_layers +
                     static_cast<int>(unit(rng) * (cfg.max_foreground_layers - cfg.min_foreground_layers + 1));
    std::vector<double> depths{background};
    for (int i = 0; i < n_fg; ++i) {
        depths.push_back(between(cfg.foreground_min_m, 0.8 * background));
    }
    std::sort(depths.begin() + 1, depths.end(), std::greater<>());
    for (std::size_t i = 1; i < depths.size(); ++i) {
        depths[i] = std::min(depths[i], depths[i - 1] * 0.95); // keep strictly decreasing
    }
    for (std::size_t i = 0; i < depths.size(); ++i) {
        SceneLayer layer;
        layer.texture = random_texture(tex, tex, rng);
        layer.depth_m = depths[i];
        if (i > 0) {
            layer.mask = random_mask(tex, cfg.size, rng);
        }
        spec.scene.layers.push_back(std::move(layer));
    }
    spec.lens = ThinLensParams(between(cfg.aperture_min_m, cfg.aperture_max_m), cfg.focal_length_m,
                               between(cfg.focus_min_m, cfg.focus_max_m), cfg.disparity_gain);
    spec.scene.validate();
    return spec;
}

CaptureData to_capture_data(const Capture &capture, const SceneSpec &spec) {
    CaptureData d;
    d.center = capture.center;
    d.dp_left = capture.dp.left.channel(0);
    d.dp_right = capture.dp.right.channel(0);
    d.neighbors = capture.neighbors;
    d.rig = spec.rig;
    d.lens = spec.lens;
    d.depth = capture.depth;
    d.confidence = capture.confidence;
    return d;
}

void write_capture(const fs::path &dir, const CaptureData &d) {
    fs::create_directories(dir);
    write_png(dir / "center.png", d.center, 16);
    write_png(dir / "dp_left.png", Image(std::vector<Grid>{d.dp_left}), 16);
    write_png(dir / "dp_right.png", Image(std::vector<Grid>{d.dp_right}), 16);
    for (std::size_t j = 0; j < 4; ++j) {
        write_png(dir / (std::string(kRigViewNames[j + 1]) + ".png"), d.neighbors[j], 16);
    }
    write_rig(dir / "rig.json", d.rig);
    write_pfm(dir / "gt_depth.pfm", d.depth.grid);
    write_pfm(dir / "gt_confidence.pfm", d.confidence);
    const json meta{{"height", d.center.height()},
                    {"width", d.center.width()},
                    {"lens", lens_to_json(d.lens)},
                    {"range", {{"near", d.depth.range.z_near}, {"far", d.depth.range.z_far}}}};
    write_text(dir / "capture.json", meta.dump(2));
}

CaptureData read_capture(const fs::path &dir) {
    if (!fs::is_directory(dir)) {
        throw FormatError("capture directory not found: " + dir.string());
    }
    CaptureData d;
    const json meta = read_json(dir / "capture.json");
    d.lens = lens_from_json(meta.at("lens"));
    d.depth.range = DepthRange(meta.at("range").at("near").get<double>(),
                               meta.at("range").at("far").get<double>());
    d.center = read_png(dir / "center.png");
    d.dp_left = read_png(dir / "dp_left.png").channel(0);
    d.dp_right = read_png(dir / "dp_right.png").channel(0);
    for (std::size_t j = 0; j < 4; ++j) {
        d.neighbors[j] = read_png(dir / (std::string(kRigViewNames[j + 1]) + ".png"));
    }
    d.rig = read_rig(dir / "rig.json");
    d.depth.grid = read_pfm(dir / "gt_depth.pfm");
    d.confidence = read_pfm(dir / "gt_confidence.pfm");
    const Grid &ref = d.center.channel(0);
    bool ok = d.center.channels() == 3 && ref.same_shape(d.dp_left) &&
              ref.same_shape(d.dp_right) && ref.same_shape(d.depth.grid) &&
              ref.same_shape(d.confidence);
    for (const Image &n : d.neighbors) {
        ok = ok && n.same_shape(d.center);
    }
    if (!ok) {
        throw DimensionError("capture rasters differ in shape: " + dir.string());
    }
    return d;
}

std::vector<fs::path> list_captures(const fs::path &root) {
    if (!fs::is_directory(root)) {
        throw FormatError("dataset directory not found: " + root.string());
    }
    std::vector<fs::path> out;
    for (const auto &entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "capture.json")) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

TrainingExample make_example(CaptureData data) {
    TrainingExample ex;
    ex.valid.assign(data.center.height() * data.center.width(), 1);
    ex.data = std::move(data);
    return ex;
}

TrainingExample translate_example(const TrainingExample &example, int dx, int dy) {
    const CaptureData &s = example.data;
    const long h = static_cast<long>(s.center.height());
    const long w = static_cast<long>(s.center.width());
    if (std::abs(dx) >= w || std::abs(dy) >= h) {
        throw DomainError("translation exceeds the image size");
    }
    if (dx == 0 && dy == 0) {
        return example;
    }
    TrainingExample out;
    CaptureData &d = out.data;
    d.center = shift_image(s.center, dx, dy);
    d.dp_left = shift_grid(s.dp_left, dx, dy);
    d.dp_right = shift_grid(s.dp_right, dx, dy);
    for (std::size_t j = 0; j < 4; ++j) {
        d.neighbors[j] = shift_image(s.neighbors[j], dx, dy);
    }
    d.rig = s.rig.shifted(dx, dy);
    d.lens = s.lens;
    d.depth = {shift_grid(s.depth.grid, dx, dy), s.depth.range};
    d.confidence = shift_grid(s.confidence, dx, dy);
    out.valid.assign(static_cast<std::size_t>(h * w), 0);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const long sy = y - dy;
            const long sx = x - dx;
            const auto i = static_cast<std::size_t>(y * w + x);
            const bool inside = sy >= 0 && sy < h && sx >= 0 && sx < w;
            out.valid[i] = inside ? example.valid[static_cast<std::size_t>(sy * w + sx)] : 0;
            if (!out.valid[i]) {
                d.confidence[i] = 0.0;
            }
        }
    }
    return out;
}

Shift sample_shift(int max_shift, std::mt19937_64 &rng) {
    std::uniform_int_distribution<int> dist(-max_shift, max_shift);
    Shift s;
    s.dx = dist(rng);
    s.dy = dist(rng);
    return s;
}

TrainingExample augment_translate(const TrainingExample &example, int max_shift,
                                  std::mt19937_64 &rng, Shift *applied) {
    const int limit = static_cast<int>(std::min(example.data.center.height(),
                                                example.data.center.width()));
    if (max_shift < 0 || max_shift >= limit) {
        throw DomainError("maximum shift must lie in [0, image size)");
    }
    const Shift s = sample_shift(max_shift, rng);
    if (applied) {
        *applied = s;
    }
    return translate_example(example, s.dx, s.dy);
}

FeatureMap network_input(const CaptureData &data, InputKind kind) {
    const std::size_t h = data.center.height();
    const std::size_t w = data.center.width();
    FeatureMap f(MicroNet::kInputChannels, h, w);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto v = data.center.channel(c).values();
        std::copy(v.begin(), v.end(), f.data.begin() + static_cast<long>(c * h * w));
    }
    if (kind == InputKind::rgbdp) {
        const auto l = data.dp_left.values();
        const auto r = data.dp_right.values();
        std::copy(l.begin(), l.end(), f.data.begin() + static_cast<long>(3 * h * w));
        std::copy(r.begin(), r.end(), f.data.begin() + static_cast<long>(4 * h * w));
    }
    return f;
}

AmbiguityDemo ambiguity_demo(std::uint64_t seed, std::size_t size, double g1, double g2) {
    std::mt19937_64 rng(seed);
    RandomSceneConfig cfg;
    cfg.size = size;
    cfg.focal_px = static_cast<double>(size);
    SceneSpec first = random_scene(cfg, rng);
    AmbiguityDemo demo;
    demo.lens1 = ThinLensParams(first.lens.aperture, first.lens.focal_length, g1,
                                first.lens.disparity_gain);
    demo.lens2 = ThinLensParams(first.lens.aperture, first.lens.focal_length, g2,
                                first.lens.disparity_gain);
    first.lens = demo.lens1;
    SceneSpec second = first;
    second.lens = demo.lens2;
    for (std::size_t i = 0; i < first.scene.layers.size(); ++i) {
        const double z1 = first.scene.layers[i].depth_m;
        const double z2 = equivalent_scene_depth(z1, demo.lens1, demo.lens2);
        second.scene.layers[i].depth_m = z2;
        demo.depths1.push_back(z1);
        demo.depths2.push_back(z2);
        demo.max_abs_disparity =
            std::max(demo.max_abs_disparity, std::abs(dp_disparity(z1, demo.lens1)));
    }
    const Capture a = render_capture(first.scene, first.rig, demo.lens1);
    const Capture b = render_capture(second.scene, second.rig, demo.lens2);
    for (std::size_t i = 0; i < a.dp.left.channel(0).size(); ++i) {
        demo.max_dp_difference =
            std::max({demo.max_dp_difference, std::abs(a.dp.left.channel(0)[i] - b.dp.left.channel(0)[i]),
                      std::abs(a.dp.right.channel(0)[i] - b.dp.right.channel(0)[i])});
    }
    return demo;
}

} // namespace dualpix
