// Copyright Contributors to the dualpix project
// SPDX-License-Identifier: Apache-2.0

#include "dualpix/camera.hpp"

#include "dualpix/core.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace dualpix {

CameraModel::CameraModel(double fx, double fy, double cx, double cy,
                         const Eigen::Matrix3d &rotation, const Eigen::Vector3d &translation)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), rotation_(rotation), translation_(translation) {
    if (!(fx > 0.0 && fy > 0.0)) {
        throw DomainError("focal lengths must be positive");
    }
    const double err =
        (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= 1e-9)) {
        throw DomainError("camera rotation is not orthonormal");
    }
    if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) ||
        !std::isfinite(cy)) {
        throw DomainError("camera parameters must be finite");
    }
}

CameraModel CameraModel::scaled(double factor) const {
    return CameraModel(fx_ * factor, fy_ * factor, (cx_ + 0.5) * factor - 0.5,
                       (cy_ + 0.5) * factor - 0.5, rotation_, translation_);
}

CameraModel CameraModel::shifted(double dx, double dy) const {
    return CameraModel(fx_, fy_, cx_ + dx, cy_ + dy, rotation_, translation_);
}

Rig Rig::scaled(double factor) const {
    Rig out;
    for (std::size_t i = 0; i < kRigViews; ++i) {
        out.cameras[i] = cameras[i].scaled(factor);
    }
    return out;
}

Rig Rig::shifted(double dx, double dy) const {
    Rig out;
    for (std::size_t i = 0; i < kRigViews; ++i) {
        out.cameras[i] = cameras[i].shifted(dx, dy);
    }
    return out;
}

Rig make_plus_rig(std::size_t width, std::size_t height, double focal_px, double baseline_m) {
    const double cx = 0.5 * (static_cast<double>(width) - 1.0);
    const double cy = 0.5 * (static_cast<double>(height) - 1.0);
    // Camera centres in world (= reference camera) coordinates, image y points down.
    const std::array<Eigen::Vector3d, kRigViews> centers = {
        Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0, -baseline_m, 0),
        Eigen::Vector3d(0, baseline_m, 0), Eigen::Vector3d(-baseline_m, 0, 0),
        Eigen::Vector3d(baseline_m, 0, 0)};
    Rig rig;
    for (std::size_t i = 0; i < kRigViews; ++i) {
        rig.cameras[i] = CameraModel(focal_px, focal_px, cx, cy, Eigen::Matrix3d::Identity(),
                                     -centers[i]);
    }
    return rig;
}

std::string rig_to_json(const Rig &rig) {
    nlohmann::json cams = nlohmann::json::array();
    for (const auto &cam : rig.cameras) {
        nlohmann::json rot = nlohmann::json::array();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                rot.push_back(cam.rotation()(r, c));
            }
        }
        const auto &t = cam.translation();
        cams.push_back({{"fx", cam.fx()},
                        {"fy", cam.fy()},
                        {"cx", cam.cx()},
                        {"cy", cam.cy()},
                        {"rotation", rot},
                        {"translation", {t.x(), t.y(), t.z()}}});
    }
    return nlohmann::json{{"cameras", cams}}.dump(2);
}

Rig rig_from_json(const std::string &text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("rig JSON: ") + e.what());
    }
    if (!doc.contains("cameras") || !doc["cameras"].is_array() ||
        doc["cameras"].size() != kRigViews) {
        throw FormatError("rig JSON must list exactly 5 cameras");
    }
    Rig rig;
    try {
        for (std::size_t i = 0; i < kRigViews; ++i) {
            const auto &c = doc["cameras"][i];
            const auto &rot = c.at("rotation");
            const auto &tr = c.at("translation");
            if (rot.size() != 9 || tr.size() != 3) {
                throw FormatError("rig JSON: rotation needs 9 and translation 3 numbers");
            }
            Eigen::Matrix3d r;
            for (int k = 0; k < 9; ++k) {
                r(k / 3, k % 3) = rot[k].get<double>();
            }
            const Eigen::Vector3d t(tr[0].get<double>(), tr[1].get<double>(),
                                    tr[2].get<double>());
            rig.cameras[i] = CameraModel(c.at("fx").get<double>(), c.at("fy").get<double>(),
                                         c.at("cx").get<double>(), c.at("cy").get<double>(), r, t);
        }
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("rig JSON: ") + e.what());
    }
    return rig;
}

void write_rig(const std::filesystem::path &path, const Rig &rig) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    out << rig_to_json(rig) << '\n';
}

Rig read_rig(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot read rig " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return rig_from_json(buf.str());
}

} // namespace dualpix
