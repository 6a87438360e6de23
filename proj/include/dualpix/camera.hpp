// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>

namespace dualpix {

/// Pinhole camera with world-to-camera pose X_cam = R * X_world + t.
class CameraModel {
  public:
    CameraModel() = default;
    CameraModel(double fx, double fy, double cx, double cy,
                const Eigen::Matrix3d &rotation = Eigen::Matrix3d::Identity(),
                const Eigen::Vector3d &translation = Eigen::Vector3d::Zero());

    double fx() const { return fx_; }
    double fy() const { return fy_; }
    double cx() const { return cx_; }
    double cy() const { return cy_; }
    const Eigen::Matrix3d &rotation() const { return rotation_; }
    const Eigen::Vector3d &translation() const { return translation_; }

    /// Camera centre in world coordinates.
    Eigen::Vector3d center() const { return -rotation_.transpose() * translation_; }

    /// Intrinsics for an image resampled by `factor` (0.5 = 2x2 box downsample),
    /// keeping pixel centres aligned.
    CameraModel scaled(double factor) const;
    /// Principal point moved by (dx, dy) pixels, as when the image content shifts.
    CameraModel shifted(double dx, double dy) const;

  private:
    double fx_ = 1.0;
    double fy_ = 1.0;
    double cx_ = 0.0;
    double cy_ = 0.0;
    Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

enum class RigView : std::size_t { center = 0, top = 1, bottom = 2, left = 3, right = 4 };

inline constexpr std::size_t kRigViews = 5;
inline constexpr std::array<const char *, kRigViews> kRigViewNames = {"center", "top", "bottom",
                                                                     "left", "right"};

/// Five-camera plus-shaped rig; index 0 is the reference (dual-pixel) camera.
struct Rig {
    std::array<CameraModel, kRigViews> cameras;

    const CameraModel &operator[](std::size_t i) const { return cameras[i]; }
    CameraModel &operator[](std::size_t i) { return cameras[i]; }

    Rig scaled(double factor) const;
    Rig shifted(double dx, double dy) const;
};

/// Reference camera at the origin looking down +Z; the four neighbours are
/// translated by `baseline` metres up/down/left/right with identical intrinsics.
Rig make_plus_rig(std::size_t width, std::size_t height, double focal_px, double baseline_m);

std::string rig_to_json(const Rig &rig);
Rig rig_from_json(const std::string &text);
void write_rig(const std::filesystem::path &path, const Rig &rig);
Rig read_rig(const std::filesystem::path &path);

} // namespace dualpix
