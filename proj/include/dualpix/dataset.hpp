// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dualpix/camera.hpp"
#include "dualpix/core.hpp"
#include "dualpix/micronet.hpp"
#include "dualpix/optics.hpp"
#include "dualpix/render.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace dualpix {

/// Everything needed to render one capture.
struct SceneSpec {
    LayeredScene scene;
    ThinLensParams lens;
    Rig rig;
};

/// Scene JSON:
///   { "height": H, "width": W,
///     "range": { "near": 0.2, "far": 100 },                      (optional)
///     "lens": { "aperture": L, "focal_length": f, "focus_distance": g,
///               "disparity_gain": alpha },
///     "rig": { "focal_px": F, "baseline_m": B },
///     "layers": [ { "texture": "bg.png", "depth_m": 3.0, "mask": null }, ... ] }
/// Paths are relative to the JSON file. Layers are listed back to front.
SceneSpec load_scene_json(const std::filesystem::path &path);

struct RandomSceneConfig {
    std::size_t size = 64;
    double focal_px = 64.0;
    double baseline_m = 0.05;
    double background_min_m = 1.5;
    double background_max_m = 3.0;
    double foreground_min_m = 0.35;
    int min_foreground_layers = 3;
    int max_foreground_layers = 6;
    double focus_min_m = 0.5;
    double focus_max_m = 1.5;
    double focal_length_m = 0.004;
    double aperture_min_m = 0.0015;
    double aperture_max_m = 0.0025;
    double disparity_gain = 187500.0; // px per metre of sensor blur
};

/// Multi-octave value-noise RGB texture in [0, 1].
Image random_texture(std::size_t height, std::size_t width, std::mt19937_64 &rng);

/// Random layered scene with value-noise textures, elliptical or rectangular
/// occluders and a random focus distance and aperture.
SceneSpec random_scene(const RandomSceneConfig &config, std::mt19937_64 &rng);

/// Rendered capture on disk:
///   center.png, dp_left.png, dp_right.png, top.png, bottom.png, left.png,
///   right.png (16-bit), rig.json, gt_depth.pfm, gt_confidence.pfm, capture.json
struct CaptureData {
    Image center;
    Grid dp_left;
    Grid dp_right;
    std::array<Image, 4> neighbors;
    Rig rig;
    ThinLensParams lens;
    InverseDepthMap depth;
    Grid confidence;
};

CaptureData to_capture_data(const Capture &capture, const SceneSpec &spec);
void write_capture(const std::filesystem::path &dir, const CaptureData &data);
CaptureData read_capture(const std::filesystem::path &dir);

/// Capture directories directly under `root`, sorted by name.
std::vector<std::filesystem::path> list_captures(const std::filesystem::path &root);

enum class InputKind { rgb, rgbdp };

/// A capture after augmentation: `valid` marks pixels that were not vacated
/// by a translation (1 = valid).
struct TrainingExample {
    CaptureData data;
    std::vector<std::uint8_t> valid;
};

TrainingExample make_example(CaptureData data);

/// Shifts every raster by (dx, dy) pixels (content moves right/down for
/// positive values). Vacated pixels replicate the edge, get confidence 0 and
/// valid = 0; principal points move with the content.
TrainingExample translate_example(const TrainingExample &example, int dx, int dy);

struct Shift {
    int dx = 0;
    int dy = 0;
};

/// Integer shift uniform in [-max_shift, max_shift]^2.
Shift sample_shift(int max_shift, std::mt19937_64 &rng);

/// Random translation; throws DomainError if max_shift reaches the image size.
TrainingExample augment_translate(const TrainingExample &example, int max_shift,
                                  std::mt19937_64 &rng, Shift *applied = nullptr);

/// 5-channel network input (RGB, DP left, DP right); DP channels are zero
/// for RGB-only input.
FeatureMap network_input(const CaptureData &data, InputKind kind);

/// Renders one random scene under two lenses focused at g1 and g2, with every
/// layer of the second scene moved to its equivalent depth. The dual-pixel
/// pairs should agree to rounding error.
struct AmbiguityDemo {
    ThinLensParams lens1;
    ThinLensParams lens2;
    std::vector<double> depths1;
    std::vector<double> depths2;
    double max_dp_difference = 0.0;
    double max_abs_disparity = 0.0;
};

AmbiguityDemo ambiguity_demo(std::uint64_t seed, std::size_t size = 64, double g1 = 1.0,
                             double g2 = 0.8);

} // namespace dualpix
